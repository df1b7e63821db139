//! Gaussian model of the sliced data: Alice's centred value `X ~ N(0, s_A²)`,
//! Bob's `Y = X + N(0, s_B²)` and Eve's `E = X + N(0, s_E²)`. Bob keeps a
//! round only if `Y` lies at least `guard` from every slice threshold.

use crate::numerics::{binary_entropy, integrate_adaptive, normal_cdf, normal_quantile};

const SPAN: f64 = 12.0;
const REL_TOL: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq)]
pub struct SliceModel {
    pub signal_sd: f64,
    pub bob_noise_sd: f64,
    /// `None` when Eve holds no copy of the signal.
    pub eve_noise_var: Option<f64>,
    /// Increasing thresholds on the centred scale.
    pub thresholds: Vec<f64>,
    pub guard: f64,
}

/// Equiprobable thresholds of `N(0, s²)` for `n_slices` binary slices.
pub fn quantile_thresholds(signal_sd: f64, n_slices: usize) -> Vec<f64> {
    let levels = 1usize << n_slices;
    (1..levels).map(|j| signal_sd * normal_quantile(j as f64 / levels as f64)).collect()
}

/// Index of the slice interval containing `x`.
pub fn level_of(x: f64, thresholds: &[f64]) -> usize {
    thresholds.partition_point(|&t| t <= x)
}

/// Distance from `x` to the nearest threshold.
pub fn threshold_distance(x: f64, thresholds: &[f64]) -> f64 {
    thresholds.iter().map(|t| (x - t).abs()).fold(f64::INFINITY, f64::min)
}

/// Binary-reflected Gray code of a level index.
pub fn gray(level: usize) -> usize {
    level ^ (level >> 1)
}

fn entropy_of(ps: &[f64]) -> f64 {
    let total: f64 = ps.iter().sum();
    if !(total > 0.0) {
        return 0.0;
    }
    ps.iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| {
            let q = p / total;
            -q * q.log2()
        })
        .sum()
}

impl SliceModel {
    pub fn levels(&self) -> usize {
        self.thresholds.len() + 1
    }

    fn interval(&self, j: usize) -> (f64, f64) {
        let lo = if j == 0 { f64::NEG_INFINITY } else { self.thresholds[j - 1] };
        let hi = self.thresholds.get(j).copied().unwrap_or(f64::INFINITY);
        (lo, hi)
    }

    // Region of level j in which Bob keeps the round.
    fn kept_region(&self, j: usize) -> Option<(f64, f64)> {
        let (lo, hi) = self.interval(j);
        let (lo, hi) = (lo + self.guard, hi - self.guard);
        (lo < hi).then_some((lo, hi))
    }

    fn bob_in_region(&self, x: f64, j: usize) -> f64 {
        let sd = self.bob_noise_sd.max(1e-12);
        self.kept_region(j)
            .map_or(0.0, |(lo, hi)| normal_cdf((hi - x) / sd) - normal_cdf((lo - x) / sd))
    }

    fn kept_given(&self, x: f64) -> f64 {
        (0..self.levels()).map(|j| self.bob_in_region(x, j)).sum()
    }

    // ∫ over Alice's level i of N(x; mean, var) · weight(x)
    fn integrate_level(&self, i: usize, mean: f64, sd: f64, weight: impl Fn(f64) -> f64) -> f64 {
        let (lo, hi) = self.interval(i);
        let lo = lo.max(mean - SPAN * sd);
        let hi = hi.min(mean + SPAN * sd);
        if lo >= hi {
            return 0.0;
        }
        let density = |x: f64| {
            let z = (x - mean) / sd;
            (-0.5 * z * z).exp() / (sd * (2.0 * std::f64::consts::PI).sqrt())
        };
        integrate_adaptive(|x| density(x) * weight(x), lo, hi, REL_TOL, 1e-15, 400).value
    }

    /// `P(level_A = i, level_B = j, kept)`.
    pub fn joint(&self) -> Vec<Vec<f64>> {
        (0..self.levels())
            .map(|i| {
                (0..self.levels())
                    .map(|j| self.integrate_level(i, 0.0, self.signal_sd, |x| self.bob_in_region(x, j)))
                    .collect()
            })
            .collect()
    }

    pub fn keep_probability(&self) -> f64 {
        self.joint().iter().flatten().sum()
    }

    /// Error rate of each Gray-coded slice among kept rounds.
    pub fn slice_error_rates(&self) -> Vec<f64> {
        let joint = self.joint();
        let kept: f64 = joint.iter().flatten().sum();
        let n_slices = self.levels().trailing_zeros() as usize;
        (0..n_slices)
            .map(|s| {
                let mut wrong = 0.0;
                for (i, row) in joint.iter().enumerate() {
                    for (j, p) in row.iter().enumerate() {
                        if (gray(i) ^ gray(j)) >> s & 1 == 1 {
                            wrong += p;
                        }
                    }
                }
                wrong / kept
            })
            .collect()
    }

    /// `H(level_A | E, kept)` in bits per kept round.
    pub fn conditional_entropy(&self) -> f64 {
        let sa = self.signal_sd;
        let Some(se2) = self.eve_noise_var.filter(|v| v.is_finite()) else {
            let marginal: Vec<f64> = self.joint().iter().map(|row| row.iter().sum()).collect();
            return entropy_of(&marginal);
        };
        let total = sa * sa + se2;
        let e_sd = total.sqrt();
        let post_sd = (sa * sa * se2 / total).sqrt();
        let gain = sa * sa / total;
        let integrand = |e: f64| {
            let weights: Vec<f64> = (0..self.levels())
                .map(|i| self.integrate_level(i, gain * e, post_sd, |x| self.kept_given(x)))
                .collect();
            let mass: f64 = weights.iter().sum();
            let z = e / e_sd;
            let density = (-0.5 * z * z).exp() / (e_sd * (2.0 * std::f64::consts::PI).sqrt());
            density * mass * entropy_of(&weights)
        };
        let value =
            integrate_adaptive(integrand, -SPAN * e_sd, SPAN * e_sd, 1e-7, 1e-13, 300).value;
        value / self.keep_probability()
    }

    /// Expected net secret bits per round for a reconciliation that discloses
    /// `efficiency · h(Q)` bits per slice bit.
    pub fn net_rate(&self, efficiency: f64) -> f64 {
        let leak: f64 = self.slice_error_rates().iter().map(|&q| efficiency * binary_entropy(q)).sum();
        self.keep_probability() * (self.conditional_entropy() - leak)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn one_slice(sb: f64, eve: Option<f64>, guard: f64) -> SliceModel {
        SliceModel {
            signal_sd: 0.5f64.sqrt(),
            bob_noise_sd: sb,
            eve_noise_var: eve,
            thresholds: quantile_thresholds(0.5f64.sqrt(), 1),
            guard,
        }
    }

    #[test]
    fn sign_disagreement_without_guard() {
        // P(sign X ≠ sign Y) = arccos(ρ)/π for jointly Gaussian X, Y
        let m = one_slice(0.5f64.sqrt(), None, 0.0);
        let rho = (0.5f64 / 1.0).sqrt();
        assert!((m.slice_error_rates()[0] - rho.acos() / PI).abs() < 1e-8);
        assert!((m.keep_probability() - 1.0).abs() < 1e-9);
        assert!((m.conditional_entropy() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn eve_sign_information_matches_closed_form() {
        // H(sign X | E) = E_e[h(Φ(μ_e/σ_post))], checked by brute-force quadrature
        let se2 = 0.5 * (1.0 + 1.0 / 0.25);
        let m = one_slice(0.8, Some(se2), 0.0);
        let (sa2, total) = (0.5, 0.5 + se2);
        let post = (sa2 * se2 / total).sqrt();
        let steps = 200_000;
        let span = 12.0 * total.sqrt();
        let h = 2.0 * span / steps as f64;
        let mut acc = 0.0;
        for k in 0..=steps {
            let e = -span + h * k as f64;
            let w = if k == 0 || k == steps { 0.5 } else { 1.0 };
            let dens = (-0.5 * e * e / total).exp() / (2.0 * PI * total).sqrt();
            acc += w * dens * binary_entropy(normal_cdf(sa2 / total * e / post));
        }
        assert!((m.conditional_entropy() - acc * h).abs() < 1e-6);
    }

    #[test]
    fn guard_band_lowers_error_rate() {
        let open = one_slice(0.79, None, 0.0);
        let guarded = one_slice(0.79, None, 0.9);
        assert!(guarded.slice_error_rates()[0] < 0.5 * open.slice_error_rates()[0]);
        let kept = guarded.keep_probability();
        assert!(kept > 0.3 && kept < 0.5, "{kept}");
    }

    #[test]
    fn gray_code_and_levels() {
        assert_eq!((0..4).map(gray).collect::<Vec<_>>(), vec![0, 1, 3, 2]);
        let t = quantile_thresholds(1.0, 2);
        assert!(t[1].abs() < 1e-12 && (t[0] + t[2]).abs() < 1e-12);
        assert_eq!(level_of(-5.0, &t), 0);
        assert_eq!(level_of(0.1, &t), 2);
        assert!((threshold_distance(0.1, &t) - 0.1).abs() < 1e-15);
    }
}
