//! Junction parameters, the effective oscillator model they induce, and the
//! displace–rotate–displace pulse sequence that prepares coherent states.

use std::f64::consts::{FRAC_PI_2, PI, SQRT_2};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fock::{FockError, FockVector};

/// Required `μ/Ω` while the drive is on.
pub const MIN_DRIVE_RATIO: f64 = 100.0;
/// Required `Ω/ν`.
pub const MIN_KERR_RATIO: f64 = 20.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DeviceError {
    #[error("regime violation: {0}")]
    RegimeViolation(String),
    #[error("invalid junction parameter: {0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Fock(#[from] FockError),
}

pub type Result<T> = std::result::Result<T, DeviceError>;

/// Physical constants of a ring with one mesoscopic junction, in natural
/// units (`ħ = k_B = c = 1`).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhysicalJunctionParams {
    pub capacitance: f64,
    pub inductance: f64,
    pub josephson_energy: f64,
    pub charge: f64,
    /// External flux amplitude while the drive is on.
    pub flux_drive: f64,
}

impl PhysicalJunctionParams {
    /// Back-solves inductance, coupling energy and drive flux that realize the
    /// requested effective rates for a chosen capacitance and charge unit.
    pub fn for_rates(
        rotation_rate: f64,
        kerr_rate: f64,
        drive_strength: f64,
        capacitance: f64,
        charge: f64,
    ) -> Result<Self> {
        let omega = rotation_rate + kerr_rate;
        let josephson_energy =
            3.0 * kerr_rate * (omega * capacitance).powi(2) / (2.0 * charge.powi(4));
        let inverse_lc = omega * omega - 4.0 * charge * charge * josephson_energy / capacitance;
        if !(inverse_lc > 0.0) {
            return Err(DeviceError::InvalidParameter(format!(
                "rates Ω = {rotation_rate}, ν = {kerr_rate} need 1/LC = {inverse_lc:.3e} > 0 at C = {capacitance}"
            )));
        }
        let inductance = 1.0 / (capacitance * inverse_lc);
        let flux_drive = drive_strength * inductance * (2.0 * omega * capacitance).sqrt();
        Ok(PhysicalJunctionParams { capacitance, inductance, josephson_energy, charge, flux_drive })
    }
}

/// Rates of `H = Ω b†b − μ(b + b†) − ν(b†b)²`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EffectiveParams {
    /// Small-oscillation frequency `ω`.
    pub bare_frequency: f64,
    /// `Ω = ω − ν`.
    pub rotation_rate: f64,
    /// Kerr rate `ν`.
    pub kerr_rate: f64,
    /// Drive strength `μ` while the flux drive is on.
    pub drive_strength: f64,
}

impl EffectiveParams {
    /// Builds the parameters directly from the rates, checking the regime.
    pub fn from_rates(rotation_rate: f64, kerr_rate: f64, drive_strength: f64) -> Result<Self> {
        let params = Self::from_rates_unchecked(rotation_rate, kerr_rate, drive_strength);
        params.check_regime()?;
        Ok(params)
    }

    /// Builds the parameters without the regime check, for studies of the
    /// stored-state dynamics at small `Ω/ν`.
    pub fn from_rates_unchecked(rotation_rate: f64, kerr_rate: f64, drive_strength: f64) -> Self {
        EffectiveParams {
            bare_frequency: rotation_rate + kerr_rate,
            rotation_rate,
            kerr_rate,
            drive_strength,
        }
    }

    /// `Ω/ν`.
    pub fn ratio(&self) -> f64 {
        self.rotation_rate / self.kerr_rate
    }

    /// `2π/ν`.
    pub fn revival_period(&self) -> f64 {
        2.0 * PI / self.kerr_rate
    }

    /// Multiplies every rate by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        EffectiveParams {
            bare_frequency: self.bare_frequency * factor,
            rotation_rate: self.rotation_rate * factor,
            kerr_rate: self.kerr_rate * factor,
            drive_strength: self.drive_strength * factor,
        }
    }

    /// Enforces `μ ≫ Ω ≫ ν` as `μ/Ω ≥ 100` and `Ω/ν ≥ 20`.
    pub fn check_regime(&self) -> Result<()> {
        if !(self.kerr_rate > 0.0) {
            return Err(DeviceError::RegimeViolation(format!(
                "Kerr rate ν = {} must be positive",
                self.kerr_rate
            )));
        }
        if !(self.rotation_rate > 0.0) || self.ratio() < MIN_KERR_RATIO {
            return Err(DeviceError::RegimeViolation(format!(
                "Ω/ν = {:.3} below {MIN_KERR_RATIO}",
                self.ratio()
            )));
        }
        if self.drive_strength / self.rotation_rate < MIN_DRIVE_RATIO {
            return Err(DeviceError::RegimeViolation(format!(
                "μ/Ω = {:.3} below {MIN_DRIVE_RATIO}",
                self.drive_strength / self.rotation_rate
            )));
        }
        Ok(())
    }
}

/// `ω = (1/CL + 4e²E_J/C)^{1/2}`, `ν = 2E_J e⁴/3(ωC)²`,
/// `μ = φ_x/(L√(2ωC))`, `Ω = ω − ν`.
pub fn effective_params(p: &PhysicalJunctionParams) -> Result<EffectiveParams> {
    let positive = [
        ("capacitance", p.capacitance),
        ("inductance", p.inductance),
        ("charge", p.charge),
        ("flux_drive", p.flux_drive),
    ];
    for (name, value) in positive {
        if !(value > 0.0) {
            return Err(DeviceError::InvalidParameter(format!("{name} = {value} must be positive")));
        }
    }
    if !(p.josephson_energy >= 0.0) {
        return Err(DeviceError::InvalidParameter(format!(
            "josephson_energy = {} must be non-negative",
            p.josephson_energy
        )));
    }
    let (c, l, ej, e) = (p.capacitance, p.inductance, p.josephson_energy, p.charge);
    let omega = (1.0 / (c * l) + 4.0 * e * e * ej / c).sqrt();
    let nu = 2.0 * ej * e.powi(4) / (3.0 * (omega * c).powi(2));
    let mu = p.flux_drive / (l * (2.0 * omega * c).sqrt());
    let params = EffectiveParams {
        bare_frequency: omega,
        rotation_rate: omega - nu,
        kerr_rate: nu,
        drive_strength: mu,
    };
    params.check_regime()?;
    Ok(params)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum PulseKind {
    Displace,
    Rotate,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Pulse {
    pub kind: PulseKind,
    pub duration: f64,
    /// Signed drive strength; zero for free rotation.
    pub drive: f64,
}

/// How the free-rotation pulse is simulated.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum PulseModel {
    /// `R = e^{−iΩ b†b τ}` only.
    #[default]
    Ideal,
    /// Full storage phase `e^{−i(Ωn − νn²)τ}` during the rotation.
    KerrDuringRotation,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PreparationSchedule {
    pub pulses: Vec<Pulse>,
}

impl PreparationSchedule {
    /// Displace–rotate–displace sequence for labels `(φ_A, v_A)` at fixed
    /// drive amplitude: each displacement pulse lasts `|label|/(√2 μ)`.
    pub fn for_labels(phi_a: f64, v_a: f64, eff: &EffectiveParams) -> Self {
        let displace = |label: f64| {
            let lambda = label / SQRT_2;
            if lambda == 0.0 {
                Pulse { kind: PulseKind::Displace, duration: 0.0, drive: 0.0 }
            } else {
                Pulse {
                    kind: PulseKind::Displace,
                    duration: lambda.abs() / eff.drive_strength,
                    drive: eff.drive_strength.copysign(lambda),
                }
            }
        };
        let rotate = Pulse {
            kind: PulseKind::Rotate,
            duration: FRAC_PI_2 / eff.rotation_rate,
            drive: 0.0,
        };
        PreparationSchedule { pulses: vec![displace(phi_a), rotate, displace(v_a)] }
    }

    /// Checks the displace–rotate–displace shape and the quarter-turn rotation.
    pub fn validate(&self, eff: &EffectiveParams) -> Result<()> {
        let kinds: Vec<PulseKind> = self.pulses.iter().map(|p| p.kind).collect();
        if kinds != [PulseKind::Displace, PulseKind::Rotate, PulseKind::Displace] {
            return Err(DeviceError::InvalidParameter(format!("pulse pattern {kinds:?}")));
        }
        let turn = eff.rotation_rate * self.pulses[1].duration;
        if (turn - FRAC_PI_2).abs() > 1e-12 {
            return Err(DeviceError::InvalidParameter(format!("rotation angle {turn} ≠ π/2")));
        }
        Ok(())
    }

    pub fn total_duration(&self) -> f64 {
        self.pulses.iter().map(|p| p.duration).sum()
    }

    /// Runs the pulses on `state`.
    pub fn apply(
        &self,
        state: &FockVector,
        eff: &EffectiveParams,
        model: PulseModel,
    ) -> Result<FockVector> {
        let mut state = state.clone();
        for pulse in &self.pulses {
            state = match (pulse.kind, model) {
                (PulseKind::Displace, _) => state.displace(pulse.drive * pulse.duration)?,
                (PulseKind::Rotate, PulseModel::Ideal) => {
                    state.rotate(eff.rotation_rate * pulse.duration)
                }
                (PulseKind::Rotate, PulseModel::KerrDuringRotation) => {
                    state.kerr_evolve(eff.rotation_rate, eff.kerr_rate, pulse.duration)
                }
            };
        }
        Ok(state)
    }
}

/// Prepares `|φ_A + i v_A⟩` from the ground state with ideal pulses.
pub fn prepare_state(
    phi_a: f64,
    v_a: f64,
    eff: &EffectiveParams,
    dim: usize,
) -> Result<(FockVector, PreparationSchedule)> {
    prepare_state_with(phi_a, v_a, eff, dim, PulseModel::Ideal)
}

pub fn prepare_state_with(
    phi_a: f64,
    v_a: f64,
    eff: &EffectiveParams,
    dim: usize,
    model: PulseModel,
) -> Result<(FockVector, PreparationSchedule)> {
    let schedule = PreparationSchedule::for_labels(phi_a, v_a, eff);
    schedule.validate(eff)?;
    let state = schedule.apply(&FockVector::vacuum(dim), eff, model)?;
    Ok((state, schedule))
}
