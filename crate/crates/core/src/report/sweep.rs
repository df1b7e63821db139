//! Security margin as a function of channel transmittance.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::fock::VACUUM_NOISE;
use crate::keyrate::{
    mutual_info_gaussian, secure_rate_background, secure_rate_scheme1, KeyRateError,
};

use super::figures::Table;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub eta: f64,
    pub chi: f64,
    pub i_ab: f64,
    pub i_ae: f64,
    /// With the scheme's intrinsic Bob noise.
    pub delta_i: f64,
    /// Plain Gaussian channel with `V = V_A + 1`.
    pub delta_i_background: f64,
    pub secure: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
    /// Transmittance where `delta_i` changes sign, if it does on the grid.
    pub crossing: Option<f64>,
    pub crossing_background: Option<f64>,
}

impl SweepResult {
    pub fn table(&self) -> Table {
        let rows = self
            .rows
            .iter()
            .map(|r| {
                vec![r.eta, r.chi, r.i_ab, r.i_ae, r.delta_i, r.delta_i_background, f64::from(u8::from(r.secure))]
            })
            .collect();
        Table {
            header: vec!["eta", "chi", "i_ab", "i_ae", "delta_i", "delta_i_background", "secure"],
            rows,
        }
    }
}

fn chi_of(eta: f64) -> f64 {
    (1.0 - eta) / eta
}

fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let below = f(lo) < 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if (f(mid) < 0.0) == below {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-15 {
            break;
        }
    }
    0.5 * (lo + hi)
}

fn crossing(grid: &[f64], values: &[f64], f: impl Fn(f64) -> f64) -> Option<f64> {
    (1..grid.len())
        .find(|&k| (values[k - 1] < 0.0) != (values[k] < 0.0))
        .map(|k| bisect(&f, grid[k - 1], grid[k]))
}

/// Evaluates the rates on `grid` for modulation `v_a` and Bob's intrinsic
/// noise `c_ab_t`, Eve holding vacuum-limited copies.
pub fn sweep_eta(v_a: f64, c_ab_t: f64, grid: &[f64]) -> Result<SweepResult, KeyRateError> {
    if grid.iter().any(|e| !(*e > 0.0 && *e <= 1.0)) {
        return Err(KeyRateError::InvalidArgument("transmittance must lie in (0, 1]".into()));
    }
    let signal = v_a * VACUUM_NOISE;
    let delta = |eta: f64| secure_rate_scheme1(v_a, chi_of(eta), c_ab_t, VACUUM_NOISE);
    let background = |eta: f64| secure_rate_background(v_a + 1.0, chi_of(eta));
    let rows = grid
        .par_iter()
        .map(|&eta| {
            let chi = chi_of(eta);
            let i_ab = mutual_info_gaussian(signal, c_ab_t + chi * VACUUM_NOISE);
            let i_ae = if chi > 0.0 {
                mutual_info_gaussian(signal, VACUUM_NOISE * (1.0 + 1.0 / chi))
            } else {
                0.0
            };
            let delta_i = delta(eta)?;
            Ok(SweepRow {
                eta,
                chi,
                i_ab,
                i_ae,
                delta_i,
                delta_i_background: background(eta),
                secure: chi < 1.0 && delta_i > 0.0,
            })
        })
        .collect::<Result<Vec<_>, KeyRateError>>()?;
    let di: Vec<f64> = rows.iter().map(|r| r.delta_i).collect();
    let db: Vec<f64> = rows.iter().map(|r| r.delta_i_background).collect();
    Ok(SweepResult {
        crossing: crossing(grid, &di, |e| delta(e).unwrap_or(f64::NAN)),
        crossing_background: crossing(grid, &db, background),
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> Vec<f64> {
        (0..96).map(|k| 0.05 + 0.01 * k as f64).collect()
    }

    #[test]
    fn vacuum_limited_crossing_is_half() {
        let s = sweep_eta(1.0, VACUUM_NOISE, &grid()).unwrap();
        assert!((s.crossing.unwrap() - 0.5).abs() < 1e-9);
        assert!((s.crossing_background.unwrap() - 0.5).abs() < 1e-9);
        for r in &s.rows {
            assert!((r.delta_i - (r.i_ab - r.i_ae)).abs() < 1e-12);
            assert_eq!(r.secure, r.eta > 0.5);
        }
    }

    #[test]
    fn time_averaged_noise_moves_crossing() {
        let s = sweep_eta(1.0, 1.5, &grid()).unwrap();
        assert!((s.crossing.unwrap() - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-9);
    }

    #[test]
    fn rejects_bad_grid() {
        assert!(sweep_eta(1.0, 0.5, &[0.0, 0.5]).is_err());
    }
}
