//! Configuration, plot data and the experiment runners behind the CLI.
//!
//! Every CSV artifact starts with a provenance comment naming the config
//! hash, the seed and the crate version, so identical inputs give identical
//! bytes.

pub mod config;
pub mod contour;
pub mod figures;
pub mod sweep;
pub mod validation;

use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use thiserror::Error;

use crate::analytic::{AnalyticError, Parity};
use crate::fock::FockError;
use crate::keyrate::{distill_key, intrinsic_noise, KeyRateError, KeyRateReport};
use crate::protocol::{run_protocol, sift, write_csv, ProtocolError, RoundSetup};

pub use config::{ConfigError, ExperimentConfig};
pub use figures::{FigureId, Table};
pub use sweep::{sweep_eta, SweepResult, SweepRow};
pub use validation::{run_validation, Check};

#[derive(Debug, Error)]
pub enum ReportError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("validation failed: {0}")]
    Validation(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
    #[error(transparent)]
    KeyRate(#[from] KeyRateError),
    #[error(transparent)]
    Analytic(#[from] AnalyticError),
    #[error(transparent)]
    Fock(#[from] FockError),
}

impl ReportError {
    /// Process exit status for this error.
    pub fn exit_code(&self) -> i32 {
        match self {
            ReportError::Config(_) => 2,
            ReportError::Validation(_) => 3,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, ReportError>;

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> ReportError + '_ {
    move |source| ReportError::Io { path: path.to_owned(), source }
}

/// Identifies the inputs that produced an artifact.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Provenance {
    pub config_sha256: String,
    pub seed: u64,
    pub version: &'static str,
}

impl Provenance {
    /// The output directory does not enter the hash.
    pub fn of(config: &ExperimentConfig) -> Self {
        let mut canonical = config.clone();
        canonical.output_dir = PathBuf::new();
        Provenance {
            config_sha256: canonical.hash(),
            seed: config.seed,
            version: env!("CARGO_PKG_VERSION"),
        }
    }

    pub fn line(&self) -> String {
        format!("# config_sha256={} seed={} squid-qkd={}", self.config_sha256, self.seed, self.version)
    }
}

fn create(dir: &Path, name: &str, prov: &Provenance) -> Result<(PathBuf, BufWriter<File>)> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let path = dir.join(name);
    let file = File::create(&path).map_err(io_err(&path))?;
    let mut out = BufWriter::new(file);
    writeln!(out, "{}", prov.line()).map_err(io_err(&path))?;
    Ok((path, out))
}

/// Writes `table` as CSV below a provenance line.
pub fn write_table(dir: &Path, name: &str, prov: &Provenance, table: &Table) -> Result<PathBuf> {
    let (path, out) = create(dir, name, prov)?;
    let to_io = |e: csv::Error| ReportError::Io { path: path.clone(), source: e.into() };
    let mut w = csv::Writer::from_writer(out);
    w.write_record(&table.header).map_err(to_io)?;
    for row in &table.rows {
        w.write_record(row.iter().map(|v| v.to_string())).map_err(to_io)?;
    }
    w.flush().map_err(io_err(&path))?;
    Ok(path)
}

fn write_json(dir: &Path, name: &str, value: &impl Serialize) -> Result<PathBuf> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let path = dir.join(name);
    let text = serde_json::to_string_pretty(value).expect("artifact serializes");
    fs::write(&path, text + "\n").map_err(io_err(&path))?;
    Ok(path)
}

fn ratio_tag(ratio: f64) -> String {
    format!("ratio{ratio}").replace('.', "p")
}

/// Writes the data for `id`, or every figure when `None`.
pub fn run_figures(config: &ExperimentConfig, id: Option<FigureId>, dir: &Path) -> Result<Vec<PathBuf>> {
    let prov = Provenance::of(config);
    let f = &config.figures;
    let ids = id.map_or(FigureId::ALL.to_vec(), |id| vec![id]);
    let mut written = Vec::new();
    for id in ids {
        match id {
            FigureId::VarianceEvolution => {
                let t = figures::variance_evolution(f.variance_ratio, f.variance_labels, f.samples)?;
                written.push(write_table(dir, "variance-evolution.csv", &prov, &t)?);
            }
            FigureId::EnsembleNoise => {
                for &ratio in &f.noise_ratios {
                    let t = figures::ensemble_noise_curve(ratio, f.samples);
                    let name = format!("ensemble-noise-{}.csv", ratio_tag(ratio));
                    written.push(write_table(dir, &name, &prov, &t)?);
                }
            }
            FigureId::CatDistribution => {
                let t = figures::cat_distribution(f.cat_ratio, f.cat_labels, config.dim, f.samples)?;
                written.push(write_table(dir, "cat-distribution.csv", &prov, &t)?);
            }
            FigureId::CatSqueezingContour => written.extend(run_contour(config, dir)?),
        }
    }
    Ok(written)
}

/// Cat-state variance surfaces and their level sets.
pub fn run_contour(config: &ExperimentConfig, dir: &Path) -> Result<Vec<PathBuf>> {
    let prov = Provenance::of(config);
    let f = &config.figures;
    let parity = Parity::of_ratio(f.cat_ratio).ok_or_else(|| {
        ConfigError::new("figures.cat_ratio", format!("{} is not an integer", f.cat_ratio))
    })?;
    let data = contour::contour_data(f.contour_extent, f.contour_points, parity, &f.contour_levels);
    let [phi, v] = &data.lines;
    Ok(vec![
        write_table(dir, "cat-squeezing-contour.csv", &prov, &data.surface)?,
        write_table(dir, "cat-squeezing-contour-lines-phi.csv", &prov, phi)?,
        write_table(dir, "cat-squeezing-contour-lines-v.csv", &prov, v)?,
    ])
}

/// Transmittance sweep for the configured scheme.
pub fn run_sweep(config: &ExperimentConfig, dir: &Path) -> Result<(SweepResult, PathBuf)> {
    let eff = config.effective()?;
    let c_ab_t = intrinsic_noise(&config.scheme, &eff);
    let result = sweep_eta(config.source.modulation_variance, c_ab_t, &config.sweep.grid())?;
    let path = write_table(dir, "sweep-eta.csv", &Provenance::of(config), &result.table())?;
    Ok((result, path))
}

#[derive(Serialize)]
struct ProtocolArtifact<'a> {
    provenance: &'a Provenance,
    report: &'a KeyRateReport,
    key_hex: String,
}

fn hex_key(bits: &[bool]) -> String {
    bits.chunks(8)
        .map(|c| {
            let byte = c.iter().enumerate().fold(0u8, |b, (k, &bit)| b | (u8::from(bit) << (7 - k)));
            format!("{byte:02x}")
        })
        .collect()
}

/// Simulates the configured protocol, distils a key and writes
/// `trials.csv` and `report.json`.
pub fn run_protocol_experiment(config: &ExperimentConfig, dir: &Path) -> Result<KeyRateReport> {
    let prov = Provenance::of(config);
    let eff = config.effective()?;
    let setup = RoundSetup {
        source: &config.source,
        channel: &config.channel,
        scheme: &config.scheme,
        device: &eff,
        engine: &config.engine,
    };
    let mut dataset = run_protocol(&setup, config.seed)?;
    let (path, mut out) = create(dir, "trials.csv", &prov)?;
    write_csv(&dataset, &mut out)?;
    out.flush().map_err(io_err(&path))?;
    let pairs = sift(&mut dataset);
    let distilled = distill_key(
        &pairs,
        intrinsic_noise(&config.scheme, &eff),
        &config.reconcile,
        config.seed.wrapping_add(1),
    )?;
    let artifact = ProtocolArtifact {
        provenance: &prov,
        report: &distilled.report,
        key_hex: hex_key(&distilled.key),
    };
    write_json(dir, "report.json", &artifact)?;
    Ok(distilled.report)
}

#[derive(Serialize)]
struct ValidationArtifact<'a> {
    provenance: &'a Provenance,
    checks: &'a [Check],
}

/// Runs the self-checks, writes `validation.json`, and fails when any check
/// does.
pub fn run_validate(config: &ExperimentConfig, dir: &Path) -> Result<Vec<Check>> {
    let prov = Provenance::of(config);
    let checks = run_validation(config.seed);
    write_json(dir, "validation.json", &ValidationArtifact { provenance: &prov, checks: &checks })?;
    let failed: Vec<&str> = checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect();
    if failed.is_empty() {
        Ok(checks)
    } else {
        Err(ReportError::Validation(failed.join("; ")))
    }
}
