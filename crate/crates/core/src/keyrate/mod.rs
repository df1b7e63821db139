//! Noise estimation, Gaussian rate formulas, and the reconciliation and
//! privacy-amplification pipeline that turns sifted data into a key.

mod amplify;
mod cascade;
mod model;

pub use amplify::{amplified_length, monobit_passes, privacy_amplify, SAFETY_MARGIN};
pub use cascade::{cascade, first_block_size, CascadeOutcome};
pub use model::{gray, level_of, quantile_thresholds, threshold_distance, SliceModel};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::analytic::{ensemble_noise, time_avg_noise};
use crate::device::EffectiveParams;
use crate::fock::{Quadrature, VACUUM_NOISE};
use crate::protocol::{MeasurementScheme, SiftedData};

/// Fewest pairs accepted by the estimators.
pub const MIN_SAMPLES: usize = 1000;

/// Disclosure per corrected bit relative to `h(Q)` assumed when choosing the
/// guard band.
pub const CASCADE_EFFICIENCY: f64 = 1.2;

/// Standard errors added to the noise estimate before the security verdict.
pub const CONFIDENCE_SIGMAS: f64 = 3.0;

/// Bits disclosed by the final equality check.
pub const VERIFICATION_BITS: usize = 64;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KeyRateError {
    #[error("too few samples: {got} < {need}")]
    TooFewSamples { got: usize, need: usize },
    #[error("Eve's noise {c_ae} is below the vacuum level")]
    EveBelowVacuum { c_ae: f64 },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("reconciliation failed: {residual_errors} residual errors")]
    ReconciliationFailure { residual_errors: usize },
}

pub type Result<T> = std::result::Result<T, KeyRateError>;

/// Mean squared gap `⟨(X_B − X_A)²⟩` with its jackknife standard error.
pub fn mean_squared_gap(alice: &[f64], other: &[f64]) -> Result<(f64, f64)> {
    if alice.len() != other.len() {
        return Err(KeyRateError::InvalidArgument(format!(
            "{} Alice values vs {} partner values",
            alice.len(),
            other.len()
        )));
    }
    let n = alice.len();
    if n < MIN_SAMPLES {
        return Err(KeyRateError::TooFewSamples { got: n, need: MIN_SAMPLES });
    }
    let gaps: Vec<f64> = alice.iter().zip(other).map(|(a, b)| (b - a).powi(2)).collect();
    let total: f64 = gaps.iter().sum();
    let mean = total / n as f64;
    let m = (n - 1) as f64;
    let spread: f64 = gaps
        .iter()
        .map(|g| ((total - g) / m - mean).powi(2))
        .sum();
    Ok((mean, (m / n as f64 * spread).sqrt()))
}

/// Empirical channel noise from sifted data.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseEstimate {
    pub c_ab: f64,
    pub c_ab_std_error: f64,
    /// Eve's noise used for the verdict, the vacuum floor plus `N₀/χ`;
    /// `None` when no channel noise is seen.
    pub c_ae: Option<f64>,
    pub c_ae_empirical: Option<f64>,
    /// Channel noise in units of `N₀` after removing the intrinsic noise.
    pub chi: f64,
    /// `chi` with [`CONFIDENCE_SIGMAS`] standard errors added.
    pub chi_upper: f64,
    pub n_samples: usize,
}

/// Noise Bob sees at `η = 1` with the given readout scheme.
pub fn intrinsic_noise(scheme: &MeasurementScheme, eff: &EffectiveParams) -> f64 {
    match *scheme {
        MeasurementScheme::ArbitraryTime => time_avg_noise(eff.rotation_rate, eff.kerr_rate),
        MeasurementScheme::TimeStamped { .. } => VACUUM_NOISE,
        MeasurementScheme::FixedTime { t } => ensemble_noise(eff.rotation_rate, eff.kerr_rate, t),
    }
}

fn reference_values(pairs: &SiftedData) -> Vec<f64> {
    if pairs.folded {
        pairs.alice.iter().map(|a| a.abs()).collect()
    } else {
        pairs.alice.clone()
    }
}

/// Estimates `C_AB` and the channel noise `χ = (C_AB − intrinsic)/N₀`.
pub fn empirical_noise(pairs: &SiftedData, intrinsic: f64) -> Result<NoiseEstimate> {
    let alice = reference_values(pairs);
    let (c_ab, se) = mean_squared_gap(&alice, &pairs.bob)?;
    let chi = ((c_ab - intrinsic) / VACUUM_NOISE).max(0.0);
    let chi_upper = ((c_ab + CONFIDENCE_SIGMAS * se - intrinsic) / VACUUM_NOISE).max(0.0);
    let c_ae_empirical = match &pairs.eve {
        Some(eve) => Some(mean_squared_gap(&pairs.alice, eve)?.0),
        None => None,
    };
    Ok(NoiseEstimate {
        c_ab,
        c_ab_std_error: se,
        c_ae: eve_noise_bound(chi_upper),
        c_ae_empirical,
        chi,
        chi_upper,
        n_samples: alice.len(),
    })
}

/// Smallest noise Eve's tap can carry when Bob sees `χ N₀`:
/// `N₀ + N₀/χ`, undefined (no tap) at `χ = 0`.
pub fn eve_noise_bound(chi: f64) -> Option<f64> {
    (chi > 0.0).then(|| VACUUM_NOISE * (1.0 + 1.0 / chi))
}

/// `½ log₂(1 + signal/noise)`.
///
/// # Panics
/// If `noise_var` is not positive.
pub fn mutual_info_gaussian(signal_var: f64, noise_var: f64) -> f64 {
    assert!(noise_var > 0.0, "noise variance {noise_var} must be positive");
    0.5 * (signal_var / noise_var).ln_1p() / std::f64::consts::LN_2
}

/// `½ log₂((V + χ)/(1 + Vχ))` for total variance `V` in units of `N₀`.
pub fn secure_rate_background(v: f64, chi: f64) -> f64 {
    0.5 * ((v + chi) / (1.0 + v * chi)).log2()
}

/// Same rate assembled from Bob's and Eve's signal-to-noise ratios,
/// `1 + Σ_B = (V + χ)/(1 + χ)` and `1 + Σ_E = (V + 1/χ)/(1 + 1/χ)`.
pub fn secure_rate_background_snr(v: f64, chi: f64) -> f64 {
    let bob = (v + chi) / (1.0 + chi);
    let eve = if chi > 0.0 { (v + 1.0 / chi) / (1.0 + 1.0 / chi) } else { 1.0 };
    0.5 * bob.log2() - 0.5 * eve.log2()
}

/// Secure rate of the stored-state protocol with Bob's intrinsic noise
/// `c_ab_t` and Eve's `c_ae_t`, all in absolute quadrature units.
pub fn secure_rate_scheme1(v_a: f64, chi: f64, c_ab_t: f64, c_ae_t: f64) -> Result<f64> {
    for (name, value) in [("V_A", v_a), ("chi", chi), ("c_ab_t", c_ab_t), ("c_ae_t", c_ae_t)] {
        if !(value >= 0.0) {
            return Err(KeyRateError::InvalidArgument(format!("{name} = {value} must be ≥ 0")));
        }
    }
    if c_ae_t < VACUUM_NOISE * (1.0 - 1e-12) {
        return Err(KeyRateError::EveBelowVacuum { c_ae: c_ae_t });
    }
    let n0 = VACUUM_NOISE;
    let bob = ((v_a + chi) * n0 + c_ab_t) / (chi * n0 + c_ab_t);
    let eve = ((1.0 + v_a * chi) * n0 + c_ae_t * chi) / (c_ae_t * chi + n0);
    Ok(0.5 * bob.log2() - 0.5 * eve.log2())
}

/// How wide a band around each threshold Bob discards.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GuardBand {
    /// Maximize the model's net rate over a grid of widths.
    Auto,
    /// Fixed half-width in quadrature units.
    Fixed(f64),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReconcileOptions {
    pub n_slices: usize,
    pub guard: GuardBand,
    pub passes: usize,
}

impl Default for ReconcileOptions {
    fn default() -> Self {
        ReconcileOptions { n_slices: 1, guard: GuardBand::Auto, passes: 4 }
    }
}

impl ReconcileOptions {
    pub fn validate(&self) -> Result<()> {
        if !(1..=5).contains(&self.n_slices) {
            return Err(KeyRateError::InvalidArgument(format!(
                "n_slices = {} outside [1, 5]",
                self.n_slices
            )));
        }
        if self.passes == 0 {
            return Err(KeyRateError::InvalidArgument("passes must be ≥ 1".into()));
        }
        if let GuardBand::Fixed(c) = self.guard {
            if !(c >= 0.0) {
                return Err(KeyRateError::InvalidArgument(format!("guard {c} must be ≥ 0")));
            }
        }
        Ok(())
    }
}

/// Output of [`slice_reconcile`]. Bit strings are slice-major: all kept
/// rounds of slice 0, then slice 1, and so on.
#[derive(Clone, Debug, PartialEq)]
pub struct Reconciliation {
    pub alice_bits: Vec<bool>,
    pub bob_bits: Vec<bool>,
    /// Sifted indices Bob kept outside the guard band.
    pub kept: Vec<usize>,
    pub leaked_bits: usize,
    pub corrections: usize,
    /// Model error rate of each slice.
    pub qber: Vec<f64>,
    pub model: SliceModel,
}

fn digest(bits: &[bool]) -> [u8; 8] {
    let mut hasher = Sha256::new();
    for chunk in bits.chunks(8) {
        hasher.update([chunk.iter().enumerate().fold(0u8, |b, (i, &x)| b | (u8::from(x) << i))]);
    }
    hasher.finalize()[..8].try_into().unwrap()
}

fn guard_grid(model: &SliceModel, eve_noise_var: Option<f64>) -> f64 {
    let y_sd = (model.signal_sd.powi(2) + model.bob_noise_sd.powi(2)).sqrt();
    let spacing = model
        .thresholds
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(f64::INFINITY, f64::min);
    let widest = (1.5 * y_sd).min(0.45 * spacing);
    (0..=15)
        .map(|k| widest * k as f64 / 15.0)
        .map(|guard| {
            let candidate = SliceModel { guard, eve_noise_var, ..model.clone() };
            (guard, candidate.net_rate(CASCADE_EFFICIENCY))
        })
        .fold((0.0, f64::NEG_INFINITY), |best, c| if c.1 > best.1 { c } else { best })
        .0
}

/// Quantizes both sides on shared quantile thresholds, drops Bob's rounds
/// inside the guard band, and corrects each Gray-coded slice with Cascade.
/// `eve_noise_var` feeds the model used to choose an automatic guard.
pub fn slice_reconcile(
    pairs: &SiftedData,
    eve_noise_var: Option<f64>,
    opts: &ReconcileOptions,
    rng: &mut ChaCha8Rng,
) -> Result<Reconciliation> {
    opts.validate()?;
    let n = pairs.len();
    if n < MIN_SAMPLES {
        return Err(KeyRateError::TooFewSamples { got: n, need: MIN_SAMPLES });
    }
    let alice = reference_values(pairs);
    let (x, y) = centred(&alice, &pairs.bob, &pairs.basis);
    let signal_sd = (x.iter().map(|v| v * v).sum::<f64>() / n as f64).sqrt();
    let bob_noise_sd =
        (x.iter().zip(&y).map(|(a, b)| (b - a).powi(2)).sum::<f64>() / n as f64).sqrt();
    let mut model = SliceModel {
        signal_sd,
        bob_noise_sd,
        eve_noise_var,
        thresholds: quantile_thresholds(signal_sd, opts.n_slices),
        guard: 0.0,
    };
    model.guard = match opts.guard {
        GuardBand::Fixed(c) => c,
        GuardBand::Auto => guard_grid(&model, eve_noise_var),
    };
    let kept: Vec<usize> =
        (0..n).filter(|&i| threshold_distance(y[i], &model.thresholds) >= model.guard).collect();
    let qber = model.slice_error_rates();

    let mut alice_bits = Vec::with_capacity(kept.len() * opts.n_slices);
    let mut bob_bits = Vec::with_capacity(kept.len() * opts.n_slices);
    let mut leaked = 0;
    let mut corrections = 0;
    for (s, &q) in qber.iter().enumerate() {
        let slice = |v: f64| gray(level_of(v, &model.thresholds)) >> s & 1 == 1;
        let a: Vec<bool> = kept.iter().map(|&i| slice(x[i])).collect();
        let b: Vec<bool> = kept.iter().map(|&i| slice(y[i])).collect();
        let out = cascade(&a, &b, q, opts.passes, rng);
        leaked += out.leaked_bits;
        corrections += out.corrections;
        alice_bits.extend(a);
        bob_bits.extend(out.corrected);
    }
    leaked += VERIFICATION_BITS;
    if digest(&alice_bits) != digest(&bob_bits) {
        let residual_errors = alice_bits.iter().zip(&bob_bits).filter(|(a, b)| a != b).count();
        return Err(KeyRateError::ReconciliationFailure { residual_errors });
    }
    Ok(Reconciliation { alice_bits, bob_bits, kept, leaked_bits: leaked, corrections, qber, model })
}

// Subtracts each basis' mean of Alice's values from both sides.
fn centred(alice: &[f64], bob: &[f64], basis: &[Quadrature]) -> (Vec<f64>, Vec<f64>) {
    let mean_of = |q: Quadrature| {
        let (sum, count) = alice
            .iter()
            .zip(basis)
            .filter(|(_, &b)| b == q)
            .fold((0.0, 0usize), |(s, c), (a, _)| (s + a, c + 1));
        if count == 0 { 0.0 } else { sum / count as f64 }
    };
    let means = [mean_of(Quadrature::Phi), mean_of(Quadrature::V)];
    let shift = |i: usize| means[usize::from(basis.get(i) == Some(&Quadrature::V))];
    let x = alice.iter().enumerate().map(|(i, a)| a - shift(i)).collect();
    let y = bob.iter().enumerate().map(|(i, b)| b - shift(i)).collect();
    (x, y)
}

/// Summary of a distillation run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KeyRateReport {
    pub n_rounds: usize,
    pub noise: NoiseEstimate,
    /// Variance of Alice's sifted values.
    pub signal_var: f64,
    /// Bits per round.
    pub i_ab: f64,
    /// Bound on Eve's information, bits per round.
    pub i_ae: f64,
    /// From Eve's simulated tap, when present.
    pub i_ae_empirical: Option<f64>,
    pub delta_i: f64,
    pub secure: bool,
    pub kept_rounds: usize,
    pub guard: f64,
    pub qber: Vec<f64>,
    pub reconciled_key_bits: usize,
    pub leaked_bits: usize,
    /// `H(key | Eve, kept)` summed over kept rounds.
    pub secret_entropy_bits: f64,
    pub final_key_bits: usize,
    pub net_rate: f64,
}

impl KeyRateReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DistilledKey {
    pub report: KeyRateReport,
    pub key: Vec<bool>,
}

/// Full post-processing: noise estimate, security verdict, reconciliation
/// and privacy amplification. Insecure data yields an empty key without
/// running reconciliation.
pub fn distill_key(
    pairs: &SiftedData,
    intrinsic: f64,
    opts: &ReconcileOptions,
    seed: u64,
) -> Result<DistilledKey> {
    let noise = empirical_noise(pairs, intrinsic)?;
    let alice = reference_values(pairs);
    let (x, _) = centred(&alice, &pairs.bob, &pairs.basis);
    let signal_var = x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64;
    let i_ab = mutual_info_gaussian(signal_var, noise.c_ab);
    let i_ae = noise.c_ae.map_or(0.0, |c| mutual_info_gaussian(signal_var, c));
    let i_ae_empirical = noise.c_ae_empirical.map(|c| mutual_info_gaussian(signal_var, c));
    let delta_i = i_ab - i_ae;
    let secure = noise.chi_upper < 1.0 && delta_i > 0.0;
    let mut report = KeyRateReport {
        n_rounds: pairs.len(),
        noise,
        signal_var,
        i_ab,
        i_ae,
        i_ae_empirical,
        delta_i,
        secure,
        kept_rounds: 0,
        guard: 0.0,
        qber: Vec::new(),
        reconciled_key_bits: 0,
        leaked_bits: 0,
        secret_entropy_bits: 0.0,
        final_key_bits: 0,
        net_rate: 0.0,
    };
    if !secure {
        return Ok(DistilledKey { report, key: Vec::new() });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rec = slice_reconcile(pairs, noise.c_ae, opts, &mut rng)?;
    let secret = rec.kept.len() as f64 * rec.model.conditional_entropy();
    let key = privacy_amplify(&rec.alice_bits, secret, rec.leaked_bits, &mut rng);
    report.kept_rounds = rec.kept.len();
    report.guard = rec.model.guard;
    report.qber = rec.qber.clone();
    report.reconciled_key_bits = rec.alice_bits.len();
    report.leaked_bits = rec.leaked_bits;
    report.secret_entropy_bits = secret;
    report.final_key_bits = key.len();
    report.net_rate = key.len() as f64 / pairs.len() as f64;
    Ok(DistilledKey { report, key })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn perfect_agreement_has_zero_noise() {
        let a: Vec<f64> = (0..2000).map(|i| (i as f64 * 0.37).sin()).collect();
        let (mean, se) = mean_squared_gap(&a, &a).unwrap();
        assert_eq!(mean, 0.0);
        assert_eq!(se, 0.0);
        assert_eq!(
            mean_squared_gap(&a[..999], &a[..999]),
            Err(KeyRateError::TooFewSamples { got: 999, need: 1000 })
        );
    }

    #[test]
    fn jackknife_matches_standard_error_of_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a: Vec<f64> = (0..5000).map(|_| rng.gen::<f64>()).collect();
        let b: Vec<f64> = a.iter().map(|x| x + rng.gen::<f64>() - 0.5).collect();
        let (mean, se) = mean_squared_gap(&a, &b).unwrap();
        let gaps: Vec<f64> = a.iter().zip(&b).map(|(x, y)| (y - x).powi(2)).collect();
        let var = gaps.iter().map(|g| (g - mean).powi(2)).sum::<f64>() / 4999.0;
        assert!((se - (var / 5000.0).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn headline_information_values() {
        assert!((mutual_info_gaussian(0.5, 1.5) - 0.5 * (4.0f64 / 3.0).log2()).abs() < 1e-15);
        assert!((mutual_info_gaussian(0.5, 1.5) - 0.2075).abs() < 5e-5);
        assert!((mutual_info_gaussian(0.5, 0.5) - 0.5).abs() < 1e-15);
        assert_eq!(mutual_info_gaussian(0.0, 0.3), 0.0);
    }

    #[test]
    fn background_rate_cases() {
        for v in [1.0, 2.0, 5.0, 40.0] {
            assert!(secure_rate_background(v, 1.0).abs() < 1e-15);
        }
        assert!((secure_rate_background(2.0, 0.0) - 0.5).abs() < 1e-15);
        for chi in [0.0, 0.3, 1.0, 4.0] {
            assert!(secure_rate_background(1.0, chi).abs() < 1e-15);
        }
    }

    #[test]
    fn scheme1_rate_cases() {
        for v_a in [0.5, 1.0, 3.0] {
            let r = secure_rate_scheme1(v_a, 0.0, 1.5, 0.5).unwrap();
            assert!((r - mutual_info_gaussian(v_a * 0.5, 1.5)).abs() < 1e-14);
        }
        for k in 1..=40 {
            let v_a = 0.25 * k as f64;
            assert!(secure_rate_scheme1(v_a, 1.0, 1.5, 0.5).unwrap() <= 0.0);
        }
        for k in 0..20 {
            let chi = 0.05 * k as f64;
            assert!(secure_rate_scheme1(1.0, chi, 0.5, 0.5).unwrap() > 0.0, "χ = {chi}");
        }
        assert_eq!(
            secure_rate_scheme1(1.0, 0.5, 1.5, 0.4),
            Err(KeyRateError::EveBelowVacuum { c_ae: 0.4 })
        );
    }

    fn synthetic(n: usize, bob_noise: f64, seed: u64) -> SiftedData {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = rand_distr::StandardNormal;
        let alice: Vec<f64> = (0..n).map(|_| 0.5f64.sqrt() * rng.sample::<f64, _>(normal)).collect();
        let bob = alice.iter().map(|a| a + bob_noise.sqrt() * rng.sample::<f64, _>(normal)).collect();
        SiftedData {
            bob,
            t_meas: vec![0.0; n],
            basis: (0..n).map(|i| if i % 2 == 0 { Quadrature::Phi } else { Quadrature::V }).collect(),
            alice,
            eve: None,
            folded: false,
        }
    }

    #[test]
    fn identical_sequences_need_no_corrections() {
        let mut pairs = synthetic(4000, 0.5, 1);
        pairs.bob = pairs.alice.clone();
        let opts = ReconcileOptions { guard: GuardBand::Fixed(0.0), ..Default::default() };
        let rec = slice_reconcile(&pairs, None, &opts, &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
        assert_eq!(rec.corrections, 0);
        assert_eq!(rec.kept.len(), 4000);
        // one block per pass plus the check
        assert_eq!(rec.leaked_bits, 4 + VERIFICATION_BITS);
        assert_eq!(rec.alice_bits, rec.bob_bits);
    }

    #[test]
    fn noisy_sequences_reconcile_exactly() {
        let pairs = synthetic(20_000, 0.5, 3);
        for n_slices in [1, 2] {
            let opts = ReconcileOptions { n_slices, ..Default::default() };
            let rec = slice_reconcile(&pairs, None, &opts, &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
            assert_eq!(rec.alice_bits, rec.bob_bits);
            assert_eq!(rec.alice_bits.len(), rec.kept.len() * n_slices);
            assert!(rec.corrections > 0);
        }
    }

    #[test]
    fn insecure_data_gives_empty_key() {
        let pairs = synthetic(20_000, 0.5 * 2.5, 5);
        let out = distill_key(&pairs, VACUUM_NOISE, &ReconcileOptions::default(), 6).unwrap();
        assert!(!out.report.secure);
        assert!(out.key.is_empty());
        assert_eq!(out.report.final_key_bits, 0);
    }

    #[test]
    fn report_round_trips_through_json() {
        let pairs = synthetic(20_000, 0.5 * 1.1, 7);
        let out = distill_key(&pairs, VACUUM_NOISE, &ReconcileOptions::default(), 8).unwrap();
        let back: KeyRateReport = serde_json::from_str(&out.report.to_json()).unwrap();
        assert_eq!(back, out.report);
        assert!((out.report.delta_i - (out.report.i_ab - out.report.i_ae)).abs() < 1e-15);
    }
}
