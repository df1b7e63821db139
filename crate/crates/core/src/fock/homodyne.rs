//! Quadrature densities and homodyne sampling.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;

use super::{FockError, FockVector, Quadrature, Result};

/// Grid resolution of the inverse-CDF sampler.
pub const DEFAULT_GRID_POINTS: usize = 4096;

const SPAN_SIGMAS: f64 = 10.0;
const MASS_TOLERANCE: f64 = 1e-4;
const MAX_WIDENINGS: usize = 4;

// Above this cutoff the unscaled recurrence can underflow at |x| where high
// number states still carry weight.
const UNSCALED_DIM_LIMIT: usize = 600;

/// Probability density of a quadrature measurement at every grid point,
/// `p(x) = |Σ aₙ ψₙ(x)|²` with `ψₙ` the oscillator eigenfunctions of
/// variance one half.
pub fn quadrature_pdf(state: &FockVector, q: Quadrature, grid: &[f64]) -> Result<Vec<f64>> {
    if grid.len() < 2 || grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(FockError::InvalidState("grid must be strictly increasing with ≥ 2 points".into()));
    }
    let amps = state.amplitudes_for(q);
    let pdf = density_on_grid(&amps, grid);
    let integral = trapezoid(grid, &pdf);
    if integral < 1.0 - MASS_TOLERANCE {
        return Err(FockError::GridTooNarrow { integral });
    }
    Ok(pdf)
}

/// Draws one homodyne outcome. Builds a fresh sampler; use
/// [`HomodyneSampler`] directly when drawing many outcomes from one state.
pub fn homodyne_sample<R: Rng + ?Sized>(
    state: &FockVector,
    q: Quadrature,
    rng: &mut R,
) -> Result<f64> {
    Ok(HomodyneSampler::new(state, q)?.sample(rng))
}

/// Inverse-CDF sampler over a uniform grid centred on the state's mean.
///
/// The density is linearly interpolated between grid points, so the CDF is
/// piecewise quadratic and inverted exactly within each cell.
#[derive(Clone, Debug)]
pub struct HomodyneSampler {
    xs: Vec<f64>,
    pdf: Vec<f64>,
    // unnormalized cumulative trapezoid mass at each node
    cumulative: Vec<f64>,
}

impl HomodyneSampler {
    pub fn new(state: &FockVector, q: Quadrature) -> Result<Self> {
        Self::with_resolution(state, q, DEFAULT_GRID_POINTS)
    }

    pub fn with_resolution(state: &FockVector, q: Quadrature, points: usize) -> Result<Self> {
        state.check_normalized()?;
        if points < 16 {
            return Err(FockError::InvalidState(format!("grid resolution {points} below 16")));
        }
        let moments = state.quadrature_moments(q);
        let sigma = moments.variance.max(1e-6).sqrt();
        let amps = state.amplitudes_for(q);
        let mut half_width = SPAN_SIGMAS * sigma;
        let mut last_integral = 0.0;
        for _ in 0..=MAX_WIDENINGS {
            let lo = moments.mean - half_width;
            let step = 2.0 * half_width / (points - 1) as f64;
            let xs: Vec<f64> = (0..points).map(|k| lo + step * k as f64).collect();
            let pdf = density_on_grid(&amps, &xs);
            let mut cumulative = Vec::with_capacity(points);
            cumulative.push(0.0);
            for k in 1..points {
                let cell = 0.5 * (pdf[k - 1] + pdf[k]) * (xs[k] - xs[k - 1]);
                cumulative.push(cumulative[k - 1] + cell);
            }
            last_integral = cumulative[points - 1];
            if last_integral >= 1.0 - MASS_TOLERANCE {
                return Ok(HomodyneSampler { xs, pdf, cumulative });
            }
            half_width *= 1.5;
        }
        Err(FockError::GridTooNarrow { integral: last_integral })
    }

    pub fn grid(&self) -> &[f64] {
        &self.xs
    }

    pub fn density(&self) -> &[f64] {
        &self.pdf
    }

    /// Trapezoid mass captured by the grid.
    pub fn captured_mass(&self) -> f64 {
        *self.cumulative.last().unwrap()
    }

    /// Sampler CDF, normalized to the captured mass.
    pub fn cdf(&self, x: f64) -> f64 {
        let total = self.captured_mass();
        if x <= self.xs[0] {
            return 0.0;
        }
        if x >= *self.xs.last().unwrap() {
            return 1.0;
        }
        let k = self.xs.partition_point(|&g| g <= x) - 1;
        let (x0, x1) = (self.xs[k], self.xs[k + 1]);
        let (p0, p1) = (self.pdf[k], self.pdf[k + 1]);
        let s = x - x0;
        let slope = (p1 - p0) / (x1 - x0);
        (self.cumulative[k] + p0 * s + 0.5 * slope * s * s) / total
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let target = rng.gen::<f64>() * self.captured_mass();
        let k = (self.cumulative.partition_point(|&c| c <= target).max(1) - 1)
            .min(self.xs.len() - 2);
        let (x0, x1) = (self.xs[k], self.xs[k + 1]);
        let (p0, p1) = (self.pdf[k], self.pdf[k + 1]);
        let h = x1 - x0;
        let mass = (target - self.cumulative[k]).max(0.0);
        // solve p0 s + (p1 − p0) s² / 2h = mass for s in [0, h]
        let a = 0.5 * (p1 - p0) / h;
        let disc = (p0 * p0 + 4.0 * a * mass).max(0.0);
        let denom = p0 + disc.sqrt();
        let s = if denom > 0.0 { 2.0 * mass / denom } else { 0.5 * h };
        x0 + s.clamp(0.0, h)
    }
}

/// `|Σ aₙ ψₙ(x)|²` on a grid via upward recurrence
/// `ψₙ₊₁ = √(2/(n+1)) x ψₙ − √(n/(n+1)) ψₙ₋₁`.
pub(crate) fn density_on_grid(amps: &[Complex64], xs: &[f64]) -> Vec<f64> {
    // trailing levels with negligible weight add nothing but cost
    let used = amps.iter().rposition(|a| a.norm_sqr() > 1e-34).map_or(1, |i| i + 1);
    let amps = &amps[..used];
    if used > UNSCALED_DIM_LIMIT {
        return xs.iter().map(|&x| density_at_scaled(amps, x)).collect();
    }
    let m = xs.len();
    let norm0 = PI.powf(-0.25);
    let mut prev = vec![0.0; m];
    let mut cur: Vec<f64> = xs.iter().map(|x| norm0 * (-0.5 * x * x).exp()).collect();
    let mut re: Vec<f64> = cur.iter().map(|c| c * amps[0].re).collect();
    let mut im: Vec<f64> = cur.iter().map(|c| c * amps[0].im).collect();
    for (n, a) in amps.iter().enumerate().skip(1) {
        let c1 = (2.0 / n as f64).sqrt();
        let c2 = ((n - 1) as f64 / n as f64).sqrt();
        for k in 0..m {
            let next = c1 * xs[k] * cur[k] - c2 * prev[k];
            prev[k] = next;
            re[k] += a.re * next;
            im[k] += a.im * next;
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    re.iter().zip(&im).map(|(r, i)| r * r + i * i).collect()
}

/// Same recurrence carried in a rescaled frame so that `ψ₀` underflow at
/// large `|x|` cannot zero out the high-`n` terms.
fn density_at_scaled(amps: &[Complex64], x: f64) -> f64 {
    const RESCALE: f64 = 1e150;
    let mut log_scale = -0.5 * x * x - 0.25 * PI.ln();
    let mut prev = 0.0;
    let mut cur = 1.0;
    let mut acc = amps[0] * cur;
    for (n, a) in amps.iter().enumerate().skip(1) {
        let next = (2.0 / n as f64).sqrt() * x * cur - ((n - 1) as f64 / n as f64).sqrt() * prev;
        prev = cur;
        cur = next;
        acc += a * cur;
        if cur.abs() > RESCALE {
            prev /= RESCALE;
            cur /= RESCALE;
            acc /= RESCALE;
            log_scale += RESCALE.ln();
        }
    }
    acc.norm_sqr() * (2.0 * log_scale).exp()
}

pub(crate) fn trapezoid(xs: &[f64], ys: &[f64]) -> f64 {
    xs.windows(2)
        .zip(ys.windows(2))
        .map(|(x, y)| 0.5 * (y[0] + y[1]) * (x[1] - x[0]))
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::{recommended_dim, Amplitude};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
        (0..n).map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64).collect()
    }

    #[test]
    fn vacuum_density_is_gaussian() {
        let xs = linspace(-6.0, 6.0, 1201);
        let pdf = quadrature_pdf(&FockVector::vacuum(8), Quadrature::Phi, &xs).unwrap();
        for (x, p) in xs.iter().zip(&pdf) {
            let expected = (-x * x).exp() / PI.sqrt();
            assert!((p - expected).abs() < 1e-14);
        }
        let peak = pdf.iter().cloned().fold(0.0, f64::max);
        assert_eq!(pdf[600], peak);
    }

    #[test]
    fn displaced_density_moments() {
        let s = FockVector::coherent(Amplitude::from_labels(2.0, 0.0), 40).unwrap();
        let xs = linspace(-6.0, 10.0, 4001);
        let pdf = quadrature_pdf(&s, Quadrature::Phi, &xs).unwrap();
        let mass = trapezoid(&xs, &pdf);
        let mean = trapezoid(&xs, &xs.iter().zip(&pdf).map(|(x, p)| x * p).collect::<Vec<_>>());
        let second =
            trapezoid(&xs, &xs.iter().zip(&pdf).map(|(x, p)| x * x * p).collect::<Vec<_>>());
        assert!((mass - 1.0).abs() < 1e-6);
        assert!((mean - 2.0).abs() < 1e-6);
        assert!((second - mean * mean - 0.5).abs() < 1e-6);
    }

    #[test]
    fn v_density_uses_rotated_state() {
        let s = FockVector::coherent(Amplitude::from_labels(0.0, 1.5), 40).unwrap();
        let xs = linspace(-6.0, 8.0, 2801);
        let pdf = quadrature_pdf(&s, Quadrature::V, &xs).unwrap();
        let mean = trapezoid(&xs, &xs.iter().zip(&pdf).map(|(x, p)| x * p).collect::<Vec<_>>());
        assert!((mean - 1.5).abs() < 1e-8);
    }

    #[test]
    fn narrow_grid_is_rejected() {
        let xs = linspace(-0.5, 0.5, 101);
        let err = quadrature_pdf(&FockVector::vacuum(4), Quadrature::Phi, &xs).unwrap_err();
        assert!(matches!(err, FockError::GridTooNarrow { .. }));
    }

    #[test]
    fn scaled_recurrence_agrees_with_vectorized() {
        let alpha = Amplitude::from_labels(3.0, -2.0);
        let s = FockVector::coherent(alpha, recommended_dim(alpha)).unwrap();
        let xs = linspace(-9.0, 9.0, 37);
        let fast = density_on_grid(s.amplitudes(), &xs);
        for (x, p) in xs.iter().zip(&fast) {
            let slow = density_at_scaled(s.amplitudes(), *x);
            assert!((p - slow).abs() < 1e-12, "x={x}: {p} vs {slow}");
        }
    }

    #[test]
    fn vacuum_sample_variance() {
        let sampler = HomodyneSampler::new(&FockVector::vacuum(8), Quadrature::Phi).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 1_000_000;
        let (mut s1, mut s2) = (0.0, 0.0);
        for _ in 0..n {
            let x = sampler.sample(&mut rng);
            s1 += x;
            s2 += x * x;
        }
        let mean = s1 / n as f64;
        let var = s2 / n as f64 - mean * mean;
        assert!((var - 0.5).abs() < 0.005, "variance {var}");
    }

    #[test]
    fn displaced_sample_mean() {
        let s = FockVector::coherent(Amplitude::from_labels(4.0, 4.0), 64).unwrap();
        let sampler = HomodyneSampler::new(&s, Quadrature::Phi).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 100_000;
        let mean = (0..n).map(|_| sampler.sample(&mut rng)).sum::<f64>() / n as f64;
        // CLT: σ/√n = 0.0022
        assert!((mean - 4.0).abs() < 0.01, "mean {mean}");
    }

    #[test]
    fn sampler_cdf_is_monotone_and_bounded() {
        let s = FockVector::coherent(Amplitude::from_labels(1.0, -0.5), 40).unwrap();
        let sampler = HomodyneSampler::with_resolution(&s, Quadrature::V, 512).unwrap();
        let xs = linspace(-8.0, 8.0, 400);
        let cdf: Vec<f64> = xs.iter().map(|&x| sampler.cdf(x)).collect();
        assert!(cdf.windows(2).all(|w| w[1] >= w[0]));
        assert_eq!(cdf[0], 0.0);
        assert_eq!(*cdf.last().unwrap(), 1.0);
        assert!((sampler.cdf(-0.5) - 0.5).abs() < 1e-6);
    }
}
