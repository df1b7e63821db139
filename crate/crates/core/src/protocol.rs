//! Monte-Carlo execution of the prepare, store, measure and sift steps.

use std::f64::consts::{FRAC_PI_2, PI};
use std::io;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::device::{prepare_state, DeviceError, EffectiveParams};
use crate::fock::{
    recommended_dim, Amplitude, FockError, FockVector, HomodyneSampler, Quadrature, VACUUM_NOISE,
};

/// Smallest distribution centre accepted by the folding scheme.
pub const MIN_FOLD_CENTER: f64 = 4.0;

/// Sampler resolution for per-round homodyne draws.
pub const ENGINE_GRID_POINTS: usize = 1024;

#[derive(Debug, Error)]
pub enum ProtocolError {
    #[error("invalid {field}: {reason}")]
    InvalidConfig { field: &'static str, reason: String },
    #[error(transparent)]
    Fock(#[from] FockError),
    #[error(transparent)]
    Device(#[from] DeviceError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, ProtocolError>;

fn invalid(field: &'static str, reason: impl Into<String>) -> ProtocolError {
    ProtocolError::InvalidConfig { field, reason: reason.into() }
}

/// Alice's Gaussian source.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SourceConfig {
    /// Modulation variance `V_A` in units of `N₀`.
    pub modulation_variance: f64,
    #[serde(default)]
    pub phi_0: f64,
    #[serde(default)]
    pub v_0: f64,
    pub n_trials: usize,
}

impl SourceConfig {
    pub fn validate(&self, scheme: &MeasurementScheme) -> Result<()> {
        if !(self.modulation_variance > 0.0) || !self.modulation_variance.is_finite() {
            return Err(invalid(
                "source.modulation_variance",
                format!("{} must be positive", self.modulation_variance),
            ));
        }
        if !self.phi_0.is_finite() || !self.v_0.is_finite() {
            return Err(invalid("source.phi_0", "centres must be finite"));
        }
        if self.n_trials == 0 {
            return Err(invalid("source.n_trials", "must be at least 1"));
        }
        if scheme.folds() {
            if self.phi_0 < MIN_FOLD_CENTER {
                return Err(invalid(
                    "source.phi_0",
                    format!("{} below {MIN_FOLD_CENTER} required by the folding scheme", self.phi_0),
                ));
            }
            if self.v_0 < MIN_FOLD_CENTER {
                return Err(invalid(
                    "source.v_0",
                    format!("{} below {MIN_FOLD_CENTER} required by the folding scheme", self.v_0),
                ));
            }
        }
        Ok(())
    }
}

/// Beamsplitter channel. `χ` is derived from `η` on demand so the two never
/// drift apart.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChannelConfig {
    pub eta: f64,
    /// Extra Gaussian label variance on Bob's side, in units of `N₀`.
    #[serde(default)]
    pub excess_noise: f64,
}

impl ChannelConfig {
    pub fn lossless() -> Self {
        ChannelConfig { eta: 1.0, excess_noise: 0.0 }
    }

    pub fn with_eta(eta: f64) -> Self {
        ChannelConfig { eta, excess_noise: 0.0 }
    }

    /// `χ = (1 − η)/η`.
    pub fn chi(&self) -> f64 {
        (1.0 - self.eta) / self.eta
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eta > 0.0 && self.eta <= 1.0) {
            return Err(invalid("channel.eta", format!("{} outside (0, 1]", self.eta)));
        }
        if !(self.excess_noise >= 0.0) || !self.excess_noise.is_finite() {
            return Err(invalid("channel.excess_noise", format!("{} must be ≥ 0", self.excess_noise)));
        }
        Ok(())
    }
}

/// When Bob reads out his stored state.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum MeasurementScheme {
    /// `t ~ U[0, 2π/ν)`, raw outcomes.
    ArbitraryTime,
    /// `t` drawn from the quarter-period marks `{0, π/2ν, π/ν, 3π/2ν, 2π/ν}`,
    /// optionally jittered, and outcomes folded to their absolute value.
    TimeStamped {
        #[serde(default)]
        time_jitter: f64,
    },
    /// Every round measured at the same time; raw outcomes.
    FixedTime { t: f64 },
}

impl MeasurementScheme {
    pub fn time_stamped() -> Self {
        MeasurementScheme::TimeStamped { time_jitter: 0.0 }
    }

    /// Whether outcomes are replaced by their absolute value.
    pub fn folds(&self) -> bool {
        matches!(self, MeasurementScheme::TimeStamped { .. })
    }

    pub fn validate(&self, eff: &EffectiveParams) -> Result<()> {
        match *self {
            MeasurementScheme::ArbitraryTime => Ok(()),
            MeasurementScheme::TimeStamped { time_jitter } => {
                if !(time_jitter >= 0.0) || !time_jitter.is_finite() {
                    return Err(invalid("scheme.time_jitter", format!("{time_jitter} must be ≥ 0")));
                }
                let ratio = eff.ratio();
                let quarter = ratio / 4.0;
                if (quarter - quarter.round()).abs() > 1e-9 * quarter.max(1.0) {
                    return Err(invalid(
                        "scheme.kind",
                        format!("time-stamped readout needs Ω/ν ≡ 0 mod 4, got {ratio}"),
                    ));
                }
                Ok(())
            }
            MeasurementScheme::FixedTime { t } => {
                if !(t >= 0.0) || !t.is_finite() {
                    return Err(invalid("scheme.t", format!("{t} must be finite and ≥ 0")));
                }
                Ok(())
            }
        }
    }

    // Returns the time and, for exact multiples of π/ν, that multiple.
    fn draw_time<R: Rng>(&self, eff: &EffectiveParams, rng: &mut R) -> (f64, Option<i64>) {
        let nu = eff.kerr_rate;
        match *self {
            MeasurementScheme::ArbitraryTime => (rng.gen::<f64>() * 2.0 * PI / nu, None),
            MeasurementScheme::TimeStamped { time_jitter } => {
                let mark = rng.gen_range(0..5i64);
                let t = mark as f64 * FRAC_PI_2 / nu;
                if time_jitter > 0.0 {
                    let dt = Normal::new(0.0, time_jitter).unwrap().sample(rng);
                    ((t + dt).max(0.0), None)
                } else {
                    (t, (mark % 2 == 0).then_some(mark / 2))
                }
            }
            MeasurementScheme::FixedTime { t } => {
                let turns = t * nu / PI;
                let k = turns.round();
                (t, ((turns - k).abs() < 1e-12 * turns.abs().max(1.0)).then_some(k as i64))
            }
        }
    }
}

/// Numerical options of the engine.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EngineConfig {
    /// Prepare every state with the pulse sequence and evolve it in Fock
    /// space, even at revival times.
    #[serde(default)]
    pub full_numeric: bool,
    #[serde(default = "default_grid_points")]
    pub grid_points: usize,
}

fn default_grid_points() -> usize {
    ENGINE_GRID_POINTS
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig { full_numeric: false, grid_points: ENGINE_GRID_POINTS }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub index: u64,
    pub phi_a: f64,
    pub v_a: f64,
    pub t_meas: f64,
    pub basis: Quadrature,
    pub outcome: f64,
    pub eve_outcome: Option<f64>,
    pub sifted_alice_value: Option<f64>,
}

/// Draws Alice's labels, each with variance `V_A·N₀` about its centre.
pub fn alice_sample<R: Rng + ?Sized>(cfg: &SourceConfig, rng: &mut R) -> (f64, f64) {
    let sd = (cfg.modulation_variance * VACUUM_NOISE).sqrt();
    let phi = cfg.phi_0 + sd * rng.sample::<f64, _>(rand_distr::StandardNormal);
    let v = cfg.v_0 + sd * rng.sample::<f64, _>(rand_distr::StandardNormal);
    (phi, v)
}

/// Splits a coherent state on a beamsplitter of transmittivity `η`.
/// Returns `(bob, eve)` amplitudes.
pub fn channel_transmit<R: Rng + ?Sized>(
    alpha: Amplitude,
    ch: &ChannelConfig,
    rng: &mut R,
) -> (Amplitude, Amplitude) {
    let mut bob = alpha.scale(ch.eta.sqrt());
    let eve = alpha.scale((1.0 - ch.eta).max(0.0).sqrt());
    if ch.excess_noise > 0.0 {
        let sd = (ch.excess_noise * VACUUM_NOISE).sqrt();
        let dphi = sd * rng.sample::<f64, _>(rand_distr::StandardNormal);
        let dv = sd * rng.sample::<f64, _>(rand_distr::StandardNormal);
        bob = Amplitude::from_labels(bob.phi() + dphi, bob.v() + dv);
    }
    (bob, eve)
}

/// Per-round random stream: the same `(seed, index)` always yields the same
/// stream regardless of scheduling.
pub fn round_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Everything a round needs besides its random stream.
#[derive(Clone, Copy, Debug)]
pub struct RoundSetup<'a> {
    pub source: &'a SourceConfig,
    pub channel: &'a ChannelConfig,
    pub scheme: &'a MeasurementScheme,
    pub device: &'a EffectiveParams,
    pub engine: &'a EngineConfig,
}

impl RoundSetup<'_> {
    pub fn validate(&self) -> Result<()> {
        self.source.validate(self.scheme)?;
        self.channel.validate()?;
        self.scheme.validate(self.device)?;
        if self.engine.grid_points < 16 {
            return Err(invalid("engine.grid_points", "must be at least 16"));
        }
        Ok(())
    }
}

/// Runs one protocol round.
pub fn run_round<R: Rng>(index: u64, setup: &RoundSetup<'_>, rng: &mut R) -> Result<TrialRecord> {
    let eff = setup.device;
    let (phi_a, v_a) = alice_sample(setup.source, rng);
    let alpha = Amplitude::from_labels(phi_a, v_a);
    let (bob, eve) = channel_transmit(alpha, setup.channel, rng);
    let basis = if rng.gen::<bool>() { Quadrature::Phi } else { Quadrature::V };
    let (t_meas, revival) = setup.scheme.draw_time(eff, rng);

    let mut outcome = match revival {
        Some(k) if !setup.engine.full_numeric => {
            // at t = kπ/ν the Kerr phase is (−1)^{kn}, so the state stays coherent
            let evolved = bob.rotate(k as f64 * PI - eff.rotation_rate * t_meas);
            basis.project(evolved) + VACUUM_NOISE.sqrt() * rng.sample::<f64, _>(rand_distr::StandardNormal)
        }
        _ => {
            let dim = recommended_dim(bob);
            let prepared = if setup.engine.full_numeric {
                prepare_state(bob.phi(), bob.v(), eff, dim)?.0
            } else {
                FockVector::coherent(bob, dim)?
            };
            let stored = prepared.kerr_evolve(eff.rotation_rate, eff.kerr_rate, t_meas);
            HomodyneSampler::with_resolution(&stored, basis, setup.engine.grid_points)?.sample(rng)
        }
    };
    if setup.scheme.folds() {
        outcome = outcome.abs();
    }
    // Eve reads her tap at once, in the basis Bob later announces.
    let eve_outcome = (setup.channel.eta < 1.0).then(|| {
        basis.project(eve) + VACUUM_NOISE.sqrt() * rng.sample::<f64, _>(rand_distr::StandardNormal)
    });
    Ok(TrialRecord {
        index,
        phi_a,
        v_a,
        t_meas,
        basis,
        outcome,
        eve_outcome,
        sifted_alice_value: None,
    })
}

/// Records of one run plus the channel and scheme needed to interpret them.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialDataset {
    pub records: Vec<TrialRecord>,
    pub eta: f64,
    pub scheme: MeasurementScheme,
}

/// Runs `source.n_trials` rounds in parallel; records come back in index order.
pub fn run_protocol(setup: &RoundSetup<'_>, seed: u64) -> Result<TrialDataset> {
    setup.validate()?;
    let records = (0..setup.source.n_trials as u64)
        .into_par_iter()
        .map(|index| run_round(index, setup, &mut round_rng(seed, index)))
        .collect::<Result<Vec<_>>>()?;
    Ok(TrialDataset { records, eta: setup.channel.eta, scheme: *setup.scheme })
}

/// Paired values after sifting, with Bob's and Eve's outcomes referred back
/// to the channel input.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SiftedData {
    pub alice: Vec<f64>,
    pub bob: Vec<f64>,
    pub eve: Option<Vec<f64>>,
    pub t_meas: Vec<f64>,
    pub basis: Vec<Quadrature>,
    /// Bob's outcomes are absolute values.
    pub folded: bool,
}

impl SiftedData {
    pub fn len(&self) -> usize {
        self.alice.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alice.is_empty()
    }
}

/// Keeps Alice's label in Bob's announced basis for every round. Bob's
/// outcomes are divided by `√η` and Eve's by `√(1 − η)`.
pub fn sift(dataset: &mut TrialDataset) -> SiftedData {
    let bob_gain = dataset.eta.sqrt().recip();
    let eve_gain = (1.0 - dataset.eta).sqrt().recip();
    let n = dataset.records.len();
    let mut out = SiftedData {
        alice: Vec::with_capacity(n),
        bob: Vec::with_capacity(n),
        eve: None,
        t_meas: Vec::with_capacity(n),
        basis: Vec::with_capacity(n),
        folded: dataset.scheme.folds(),
    };
    let mut eve = Vec::with_capacity(n);
    let mut eve_complete = dataset.eta < 1.0;
    for r in &mut dataset.records {
        let value = match r.basis {
            Quadrature::Phi => r.phi_a,
            Quadrature::V => r.v_a,
        };
        r.sifted_alice_value = Some(value);
        out.alice.push(value);
        out.bob.push(r.outcome * bob_gain);
        out.t_meas.push(r.t_meas);
        out.basis.push(r.basis);
        match r.eve_outcome {
            Some(e) => eve.push(e * eve_gain),
            None => eve_complete = false,
        }
    }
    if eve_complete {
        out.eve = Some(eve);
    }
    out
}

#[derive(Serialize)]
struct CsvRow {
    index: u64,
    #[serde(rename = "phi_A")]
    phi_a: f64,
    #[serde(rename = "v_A")]
    v_a: f64,
    t_meas: f64,
    basis: String,
    outcome: f64,
    eve_outcome: Option<f64>,
}

/// Writes the records as CSV with a header row.
pub fn write_csv<W: io::Write>(dataset: &TrialDataset, out: W) -> Result<()> {
    let mut writer = csv::Writer::from_writer(out);
    for r in &dataset.records {
        writer.serialize(CsvRow {
            index: r.index,
            phi_a: r.phi_a,
            v_a: r.v_a,
            t_meas: r.t_meas,
            basis: r.basis.to_string(),
            outcome: r.outcome,
            eve_outcome: r.eve_outcome,
        })?;
    }
    writer.flush().map_err(csv::Error::from)?;
    Ok(())
}
