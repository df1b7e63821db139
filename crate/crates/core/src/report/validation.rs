//! Self-checks of the analytic layer against the numerical one.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::analytic::{
    cat_decomposition, ensemble_noise, noise_cab, time_avg_noise, variance_closed_form,
};
use crate::device::{prepare_state, EffectiveParams};
use crate::fock::{recommended_dim, Amplitude, FockVector, HomodyneSampler, Quadrature, VACUUM_NOISE};
use crate::keyrate::{secure_rate_background, secure_rate_background_snr};
use crate::numerics::{ks_critical, ks_statistic, normal_cdf};

use super::sweep::sweep_eta;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: &str, worst: f64, tolerance: f64) -> Self {
        Check {
            name: name.to_owned(),
            passed: worst.is_finite() && worst <= tolerance,
            detail: format!("worst {worst:.3e}, tolerance {tolerance:.1e}"),
        }
    }

    fn failed(name: &str, err: impl std::fmt::Display) -> Self {
        Check { name: name.to_owned(), passed: false, detail: err.to_string() }
    }
}

fn overlap_gap(a: &FockVector, b: &FockVector) -> f64 {
    a.overlap(b).map_or(f64::INFINITY, |o| 1.0 - o.norm())
}

fn random_alpha(rng: &mut ChaCha8Rng, radius: f64) -> Amplitude {
    Amplitude::from_labels(rng.gen_range(-radius..radius), rng.gen_range(-radius..radius))
}

fn revival(rng: &mut ChaCha8Rng) -> Check {
    let worst = (0..20)
        .map(|_| {
            let alpha = random_alpha(rng, 3.0);
            let dim = recommended_dim(alpha);
            let Ok(state) = FockVector::coherent(alpha, dim) else { return f64::INFINITY };
            let k = rng.gen_range(1..4) as f64;
            let evolved = state.kerr_evolve(100.0, 1.0, k * PI);
            let expected = alpha.rotate(k * PI - 100.0 * k * PI);
            FockVector::coherent(expected, dim).map_or(f64::INFINITY, |e| overlap_gap(&evolved, &e))
        })
        .fold(0.0, f64::max);
    Check::new("kerr revival returns coherent states", worst, 1e-9)
}

fn fractional_cats(rng: &mut ChaCha8Rng) -> Check {
    let mut worst: f64 = 0.0;
    for (p, q) in [(1, 2), (1, 3), (2, 3), (1, 4)] {
        let alpha = random_alpha(rng, 2.0);
        let dim = recommended_dim(alpha) + 20;
        let Ok(dec) = cat_decomposition(p, q, 7.0, alpha) else {
            return Check::failed("fractional revival cats", format!("p = {p}, q = {q}"));
        };
        let numeric = FockVector::coherent(alpha, dim).map(|s| s.kerr_evolve(7.0, 1.0, dec.time(1.0)));
        let cat = FockVector::from_amplitudes(dec.superpose(dim));
        worst = match (numeric, cat) {
            (Ok(a), Ok(b)) => worst.max(overlap_gap(&a, &b)),
            _ => f64::INFINITY,
        };
    }
    Check::new("fractional revival cats", worst, 1e-9)
}

fn closed_forms(rng: &mut ChaCha8Rng) -> [Check; 2] {
    let (mut var_gap, mut noise_gap): (f64, f64) = (0.0, 0.0);
    for _ in 0..200 {
        let alpha = random_alpha(rng, 2.0);
        let t = rng.gen_range(0.0..2.0 * PI);
        let ratio = rng.gen_range(1..12) as f64;
        let Ok(state) = FockVector::coherent(alpha, recommended_dim(alpha)) else {
            var_gap = f64::INFINITY;
            continue;
        };
        let evolved = state.kerr_evolve(ratio, 1.0, t);
        for q in Quadrature::BOTH {
            let m = evolved.quadrature_moments(q);
            let closed = variance_closed_form(alpha, ratio, 1.0, t, q).unwrap_or(f64::NAN);
            var_gap = var_gap.max((closed - m.variance).abs());
            // ⟨(X_B − x_A)²⟩ about Alice's label
            let x_a = q.project(alpha);
            let numeric = m.variance + (m.mean - x_a).powi(2);
            let analytic = noise_cab(alpha, ratio, 1.0, t, q).unwrap_or(f64::NAN);
            noise_gap = noise_gap.max((analytic - numeric).abs());
        }
    }
    [
        Check::new("variance closed form matches Fock moments", var_gap, 1e-8),
        Check::new("noise closed form matches Fock moments", noise_gap, 1e-8),
    ]
}

fn noise_levels() -> [Check; 2] {
    let special = [
        (ensemble_noise(5.0, 1.0, PI) - 0.5).abs(),
        (ensemble_noise(6.0, 1.0, PI) - 2.5).abs(),
        (ensemble_noise(6.0, 1.0, 0.0) - 0.5).abs(),
    ];
    [
        Check::new("ensemble noise at half period", special.iter().copied().fold(0.0, f64::max), 1e-12),
        Check::new("time-averaged noise", (time_avg_noise(100.0, 1.0) - 1.5).abs(), 2e-3),
    ]
}

fn preparation(rng: &mut ChaCha8Rng) -> Check {
    let Ok(eff) = EffectiveParams::from_rates(1e4, 100.0, 1e6) else {
        return Check::failed("pulse preparation fidelity", "reference device rejected");
    };
    let worst = (0..20)
        .map(|_| {
            let (phi, v) = (rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0));
            let alpha = Amplitude::from_labels(phi, v);
            let dim = recommended_dim(alpha);
            match (prepare_state(phi, v, &eff, dim), FockVector::coherent(alpha, dim)) {
                (Ok((state, _)), Ok(target)) => overlap_gap(&state, &target),
                _ => f64::INFINITY,
            }
        })
        .fold(0.0, f64::max);
    Check::new("pulse preparation fidelity", worst, 1e-9)
}

fn rates() -> [Check; 2] {
    let crossing = sweep_eta(1.0, VACUUM_NOISE, &[0.1, 0.3, 0.7, 0.9])
        .ok()
        .and_then(|s| s.crossing)
        .map_or(f64::INFINITY, |c| (c - 0.5).abs());
    let routes = [(2.0, 0.3), (10.0, 0.9), (1.5, 4.0)]
        .iter()
        .map(|&(v, chi)| (secure_rate_background(v, chi) - secure_rate_background_snr(v, chi)).abs())
        .fold(0.0, f64::max);
    [
        Check::new("security threshold at half transmittance", crossing, 1e-9),
        Check::new("background rate closed form and SNR form agree", routes, 1e-12),
    ]
}

fn vacuum_sampling(rng: &mut ChaCha8Rng) -> Check {
    let n = 20_000;
    let sampler = match HomodyneSampler::new(&FockVector::vacuum(8), Quadrature::Phi) {
        Ok(s) => s,
        Err(e) => return Check::failed("vacuum homodyne samples", e),
    };
    let xs: Vec<f64> = (0..n).map(|_| sampler.sample(rng)).collect();
    let d = ks_statistic(&xs, |x| normal_cdf(x / VACUUM_NOISE.sqrt()));
    Check::new("vacuum homodyne samples", d, ks_critical(n))
}

/// Runs every check with a deterministic random stream.
pub fn run_validation(seed: u64) -> Vec<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut checks = vec![revival(&mut rng), fractional_cats(&mut rng)];
    checks.extend(closed_forms(&mut rng));
    checks.extend(noise_levels());
    checks.push(preparation(&mut rng));
    checks.extend(rates());
    checks.push(vacuum_sampling(&mut rng));
    checks
}
