//! Plot-ready data for the variance, noise and cat-state figures. Times are
//! in units of `1/ν`.

use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt;
use std::str::FromStr;

use crate::analytic::{ensemble_noise, variance_closed_form, AnalyticError};
use crate::fock::{quadrature_pdf, recommended_dim, Amplitude, FockError, FockVector, Quadrature};

/// Named numeric table.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let k = self.header.iter().position(|h| *h == name)?;
        Some(self.rows.iter().map(|r| r[k]).collect())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum FigureId {
    VarianceEvolution,
    CatSqueezingContour,
    EnsembleNoise,
    CatDistribution,
}

impl FigureId {
    pub const ALL: [FigureId; 4] = [
        FigureId::VarianceEvolution,
        FigureId::CatSqueezingContour,
        FigureId::EnsembleNoise,
        FigureId::CatDistribution,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FigureId::VarianceEvolution => "variance-evolution",
            FigureId::CatSqueezingContour => "cat-squeezing-contour",
            FigureId::EnsembleNoise => "ensemble-noise",
            FigureId::CatDistribution => "cat-distribution",
        }
    }
}

impl fmt::Display for FigureId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FigureId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        FigureId::ALL.into_iter().find(|id| id.name() == s).ok_or_else(|| {
            let names: Vec<&str> = FigureId::ALL.iter().map(|id| id.name()).collect();
            format!("unknown figure `{s}`, expected one of {}", names.join(", "))
        })
    }
}

fn linspace(lo: f64, hi: f64, n: usize) -> impl Iterator<Item = f64> {
    let step = (hi - lo) / (n - 1) as f64;
    (0..n).map(move |k| if k + 1 == n { hi } else { lo + step * k as f64 })
}

/// `(t, var Φ, var V, product)` over one revival period.
pub fn variance_evolution(ratio: f64, labels: [f64; 2], samples: usize) -> Result<Table, AnalyticError> {
    let alpha = Amplitude::from_labels(labels[0], labels[1]);
    let rows = linspace(0.0, 2.0 * PI, samples)
        .map(|t| {
            let vp = variance_closed_form(alpha, ratio, 1.0, t, Quadrature::Phi)?;
            let vv = variance_closed_form(alpha, ratio, 1.0, t, Quadrature::V)?;
            Ok(vec![t, vp, vv, vp * vv])
        })
        .collect::<Result<_, AnalyticError>>()?;
    Ok(Table { header: vec!["t", "var_phi", "var_v", "product"], rows })
}

/// `(t, C)` of the Alice-averaged noise over one revival period.
pub fn ensemble_noise_curve(ratio: f64, samples: usize) -> Table {
    let rows = linspace(0.0, 2.0 * PI, samples).map(|t| vec![t, ensemble_noise(ratio, 1.0, t)]).collect();
    Table { header: vec!["t", "noise"], rows }
}

/// Quadrature densities of `|α⟩` stored until `t = π/2ν`, raw and folded
/// onto `x ≥ 0`.
pub fn cat_distribution(
    ratio: f64,
    labels: [f64; 2],
    dim: Option<usize>,
    samples: usize,
) -> Result<Table, FockError> {
    let alpha = Amplitude::from_labels(labels[0], labels[1]);
    let dim = dim.unwrap_or_else(|| recommended_dim(alpha));
    let state = FockVector::coherent(alpha, dim)?.kerr_evolve(ratio, 1.0, FRAC_PI_2);
    let half = labels[0].abs().max(labels[1].abs()) + 8.0;
    // odd count keeps the grid mirror-symmetric about 0
    let n = samples | 1;
    let grid: Vec<f64> = linspace(-half, half, n).collect();
    let phi = quadrature_pdf(&state, Quadrature::Phi, &grid)?;
    let v = quadrature_pdf(&state, Quadrature::V, &grid)?;
    let fold = |p: &[f64], k: usize| {
        if grid[k] < 0.0 {
            0.0
        } else if grid[k] == 0.0 {
            p[k]
        } else {
            p[k] + p[n - 1 - k]
        }
    };
    let rows = (0..n).map(|k| vec![grid[k], phi[k], v[k], fold(&phi, k), fold(&v, k)]).collect();
    Ok(Table { header: vec!["x", "pdf_phi", "pdf_v", "folded_phi", "folded_v"], rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn figure_names_round_trip() {
        for id in FigureId::ALL {
            assert_eq!(id.name().parse::<FigureId>().unwrap(), id);
        }
        assert!("fig-9".parse::<FigureId>().is_err());
    }

    #[test]
    fn variance_trace_obeys_uncertainty() {
        let table = variance_evolution(5.0, [0.3, 0.3], 401).unwrap();
        let product = table.column("product").unwrap();
        assert!(product.iter().all(|p| *p >= 0.25 - 1e-9));
        assert!((product[0] - 0.25).abs() < 1e-12 && (product[400] - 0.25).abs() < 1e-9);
        let squeezed = table.column("var_phi").unwrap().iter().any(|v| *v < 0.5);
        assert!(squeezed);
    }

    #[test]
    fn even_and_odd_noise_curves_differ_at_half_period() {
        let odd = ensemble_noise_curve(5.0, 201);
        let even = ensemble_noise_curve(6.0, 201);
        assert!((odd.rows[100][1] - 0.5).abs() < 1e-12);
        assert!((even.rows[100][1] - 2.5).abs() < 1e-12);
    }

    #[test]
    fn cat_density_is_bimodal_and_folds_to_unit_mass() {
        let table = cat_distribution(100.0, [4.0, 4.0], None, 2001).unwrap();
        let x = table.column("x").unwrap();
        let pdf = table.column("pdf_phi").unwrap();
        let folded = table.column("folded_phi").unwrap();
        let peak = |lo: f64, hi: f64| {
            (0..x.len())
                .filter(|&k| x[k] > lo && x[k] < hi)
                .max_by(|&a, &b| pdf[a].total_cmp(&pdf[b]))
                .map(|k| x[k])
                .unwrap()
        };
        assert!((peak(0.0, 10.0) - 4.0).abs() < 0.05);
        assert!((peak(-10.0, 0.0) + 4.0).abs() < 0.05);
        let h = x[1] - x[0];
        let mass: f64 = folded.iter().sum::<f64>() * h;
        assert!((mass - 1.0).abs() < 1e-3);
    }
}
