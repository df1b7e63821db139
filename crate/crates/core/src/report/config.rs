//! Experiment configuration file.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::device::{effective_params, EffectiveParams, PhysicalJunctionParams};
use crate::keyrate::{GuardBand, ReconcileOptions};
use crate::protocol::{
    ChannelConfig, EngineConfig, MeasurementScheme, ProtocolError, RoundSetup, SourceConfig,
};

/// A configuration problem, tagged with the offending field's dotted path.
#[derive(Clone, Debug, PartialEq)]
pub struct ConfigError {
    pub field: String,
    pub message: String,
}

impl ConfigError {
    pub fn new(field: impl Into<String>, message: impl Into<String>) -> Self {
        ConfigError { field: field.into(), message: message.into() }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "config field `{}`: {}", self.field, self.message)
    }
}

impl std::error::Error for ConfigError {}

/// Rates given directly instead of junction constants.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RateConfig {
    pub rotation_rate: f64,
    pub kerr_rate: f64,
    pub drive_strength: f64,
}

/// Exactly one of the two blocks must be present.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeviceConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub physical: Option<PhysicalJunctionParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub effective: Option<RateConfig>,
}

impl DeviceConfig {
    pub fn resolve(&self) -> Result<EffectiveParams, ConfigError> {
        match (self.physical, self.effective) {
            (Some(p), None) => effective_params(&p)
                .map_err(|e| ConfigError::new("device.physical", e.to_string())),
            (None, Some(r)) => EffectiveParams::from_rates(r.rotation_rate, r.kerr_rate, r.drive_strength)
                .map_err(|e| ConfigError::new("device.effective", e.to_string())),
            (Some(_), Some(_)) => Err(ConfigError::new(
                "device",
                "give either [device.physical] or [device.effective], not both",
            )),
            (None, None) => Err(ConfigError::new(
                "device",
                "missing [device.physical] or [device.effective] block",
            )),
        }
    }
}

/// `η` grid for the security sweep.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub eta_min: f64,
    pub eta_max: f64,
    pub points: usize,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig { eta_min: 0.05, eta_max: 1.0, points: 96 }
    }
}

impl SweepConfig {
    pub fn grid(&self) -> Vec<f64> {
        if self.points == 1 {
            return vec![self.eta_max];
        }
        let step = (self.eta_max - self.eta_min) / (self.points - 1) as f64;
        (0..self.points).map(|k| self.eta_min + step * k as f64).collect()
    }
}

/// Parameters of the figure generators. Times are in units of `1/ν`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FigureConfig {
    pub samples: usize,
    /// `Ω/ν` and labels of the variance-evolution trace.
    pub variance_ratio: f64,
    pub variance_labels: [f64; 2],
    pub noise_ratios: Vec<f64>,
    /// Half-width and points per axis of the contour grid.
    pub contour_extent: f64,
    pub contour_points: usize,
    pub contour_levels: Vec<f64>,
    pub cat_ratio: f64,
    pub cat_labels: [f64; 2],
}

impl Default for FigureConfig {
    fn default() -> Self {
        FigureConfig {
            samples: 2001,
            variance_ratio: 5.0,
            variance_labels: [0.3, 0.3],
            noise_ratios: vec![5.0, 6.0],
            contour_extent: 2.0,
            contour_points: 161,
            contour_levels: vec![0.5, 0.4],
            cat_ratio: 100.0,
            cat_labels: [4.0, 4.0],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    /// Truncation override for figure states; chosen per state when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dim: Option<usize>,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    pub device: DeviceConfig,
    pub source: SourceConfig,
    #[serde(default = "ChannelConfig::lossless")]
    pub channel: ChannelConfig,
    pub scheme: MeasurementScheme,
    #[serde(default)]
    pub engine: EngineConfig,
    #[serde(default)]
    pub reconcile: ReconcileOptions,
    #[serde(default)]
    pub sweep: SweepConfig,
    #[serde(default)]
    pub figures: FigureConfig,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

impl Default for ExperimentConfig {
    /// Time-stamped readout at the canonical operating point.
    fn default() -> Self {
        ExperimentConfig {
            seed: 0,
            dim: None,
            output_dir: default_output_dir(),
            device: DeviceConfig {
                physical: None,
                effective: Some(RateConfig { rotation_rate: 1e4, kerr_rate: 100.0, drive_strength: 1e6 }),
            },
            source: SourceConfig { modulation_variance: 1.0, phi_0: 4.0, v_0: 4.0, n_trials: 100_000 },
            channel: ChannelConfig::lossless(),
            scheme: MeasurementScheme::time_stamped(),
            engine: EngineConfig::default(),
            reconcile: ReconcileOptions::default(),
            sweep: SweepConfig::default(),
            figures: FigureConfig::default(),
        }
    }
}

// toml reports missing or unknown keys with the name in backticks
fn field_from_toml(err: &toml::de::Error) -> String {
    let message = err.message();
    message
        .split('`')
        .nth(1)
        .filter(|_| message.contains('`'))
        .map(str::to_owned)
        .unwrap_or_else(|| "<document>".to_owned())
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let config: ExperimentConfig = toml::from_str(text).map_err(|e| {
            ConfigError::new(field_from_toml(&e), e.message().trim().to_owned())
        })?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::new("<file>", format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// SHA-256 of the canonical serialization, hex encoded.
    pub fn hash(&self) -> String {
        Sha256::digest(self.to_toml().as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn effective(&self) -> Result<EffectiveParams, ConfigError> {
        self.device.resolve()
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let eff = self.effective()?;
        let setup = RoundSetup {
            source: &self.source,
            channel: &self.channel,
            scheme: &self.scheme,
            device: &eff,
            engine: &self.engine,
        };
        setup.validate().map_err(|e| match e {
            ProtocolError::InvalidConfig { field, reason } => ConfigError::new(field, reason),
            other => ConfigError::new("<document>", other.to_string()),
        })?;
        self.reconcile
            .validate()
            .map_err(|e| ConfigError::new("reconcile", e.to_string()))?;
        if let GuardBand::Fixed(c) = self.reconcile.guard {
            if !c.is_finite() {
                return Err(ConfigError::new("reconcile.guard", "must be finite"));
            }
        }
        if let Some(dim) = self.dim {
            if dim < 2 {
                return Err(ConfigError::new("dim", format!("{dim} must be at least 2")));
            }
        }
        let s = &self.sweep;
        if !(s.eta_min > 0.0 && s.eta_max <= 1.0 && s.eta_min <= s.eta_max) || s.points == 0 {
            return Err(ConfigError::new(
                "sweep",
                format!("grid [{}, {}] × {} must lie in (0, 1]", s.eta_min, s.eta_max, s.points),
            ));
        }
        let f = &self.figures;
        if f.samples < 2 || f.contour_points < 2 {
            return Err(ConfigError::new("figures", "sample counts must be at least 2"));
        }
        if !(f.contour_extent > 0.0 && f.contour_extent.is_finite()) {
            return Err(ConfigError::new("figures.contour_extent", "must be positive"));
        }
        Ok(())
    }
}
