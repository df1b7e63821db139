//! Closed-form quadrature statistics of Kerr-evolved coherent states.
//!
//! Every expression is evaluated in complex arithmetic exactly as written
//! and only then checked for realness, so a sign slip in a term shows up as
//! an imaginary residue instead of being silently absorbed.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fock::{coherent_amplitudes, Amplitude, Quadrature};
use crate::numerics::integrate_adaptive;

const REALNESS_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalyticError {
    #[error("closed form left imaginary residue {residue:.3e} (value {value})")]
    NonRealResult { value: f64, residue: f64 },
    #[error("p = {p} and q = {q} are not coprime")]
    NotCoprime { p: u32, q: u32 },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, AnalyticError>;

/// Parity of the engineered ratio `Ω/ν`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Parity {
    Even,
    Odd,
}

impl Parity {
    /// Parity of an integer ratio; `None` when the ratio is not an integer.
    pub fn of_ratio(ratio: f64) -> Option<Parity> {
        let rounded = ratio.round();
        if (ratio - rounded).abs() > 1e-9 {
            return None;
        }
        Some(if (rounded as i64).rem_euclid(2) == 0 { Parity::Even } else { Parity::Odd })
    }
}

/// Shorthand phases of the storage evolution at time `t`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KerrPhaseContext {
    pub alpha: Complex64,
    /// `Ω − 2ν`
    pub xi: f64,
    /// `Ω − ν`
    pub zeta: f64,
    /// `e^{2iνt}`
    pub gamma: Complex64,
    /// `(v + iφ)/√2 = i α*`
    pub beta: Complex64,
    pub t: f64,
}

impl KerrPhaseContext {
    pub fn new(alpha: Amplitude, rotation_rate: f64, kerr_rate: f64, t: f64) -> Self {
        let zeta = rotation_rate - kerr_rate;
        KerrPhaseContext {
            alpha: alpha.0,
            xi: zeta - kerr_rate,
            zeta,
            gamma: Complex64::from_polar(1.0, 2.0 * kerr_rate * t),
            beta: Complex64::new(alpha.v(), alpha.phi()) / std::f64::consts::SQRT_2,
            t,
        }
    }

    fn n(&self) -> f64 {
        self.alpha.norm_sqr()
    }

    /// `e^{|α|²(γ² − 1) − 2itξ}`
    fn second_order(&self) -> Complex64 {
        (self.n() * (self.gamma * self.gamma - 1.0) - Complex64::i() * 2.0 * self.t * self.xi).exp()
    }

    /// `e^{|α|²(γ⁻² − 1) + 2itξ}`
    fn second_order_conj(&self) -> Complex64 {
        let inv = self.gamma.inv();
        (self.n() * (inv * inv - 1.0) + Complex64::i() * 2.0 * self.t * self.xi).exp()
    }

    /// `e^{|α|²(γ − 1)}`
    fn first_order(&self) -> Complex64 {
        (self.n() * (self.gamma - 1.0)).exp()
    }

    /// `e^{|α|²(γ⁻¹ − 1) + 2itζ}`
    fn first_order_conj(&self) -> Complex64 {
        (self.n() * (self.gamma.inv() - 1.0) + Complex64::i() * 2.0 * self.t * self.zeta).exp()
    }

    /// `e^{−itζ}`
    fn rotation(&self) -> Complex64 {
        Complex64::from_polar(1.0, -self.t * self.zeta)
    }
}

fn real_part(z: Complex64, scale: f64) -> Result<f64> {
    if z.im.abs() > REALNESS_TOLERANCE * scale.max(1.0) || !z.re.is_finite() {
        return Err(AnalyticError::NonRealResult { value: z.re, residue: z.im });
    }
    Ok(z.re)
}

fn check_rates(kerr_rate: f64, t: f64) -> Result<()> {
    if !(kerr_rate > 0.0) {
        return Err(AnalyticError::InvalidArgument(format!("Kerr rate ν = {kerr_rate} must be positive")));
    }
    if !(t >= 0.0) {
        return Err(AnalyticError::InvalidArgument(format!("time t = {t} must be non-negative")));
    }
    Ok(())
}

/// Quadrature variance of `e^{−iΩb†bt} e^{iν(b†b)²t}|α⟩`.
pub fn variance_closed_form(
    alpha: Amplitude,
    rotation_rate: f64,
    kerr_rate: f64,
    t: f64,
    q: Quadrature,
) -> Result<f64> {
    check_rates(kerr_rate, t)?;
    let ctx = KerrPhaseContext::new(alpha, rotation_rate, kerr_rate, t);
    let (a, b) = (ctx.alpha, ctx.beta);
    let base = Complex64::new(1.0 + 2.0 * ctx.n(), 0.0);
    let squeeze = a * a * ctx.second_order() - b * b * ctx.second_order_conj();
    let rot2 = ctx.rotation() * ctx.rotation();
    let value = match q {
        Quadrature::Phi => {
            let mean_part = b.conj() * ctx.first_order() - b * ctx.first_order_conj();
            0.5 * (base + squeeze + rot2 * mean_part * mean_part)
        }
        Quadrature::V => {
            let mean_part = b.conj() * ctx.first_order() + b * ctx.first_order_conj();
            0.5 * (base - squeeze - rot2 * mean_part * mean_part)
        }
    };
    real_part(value, 1.0 + 2.0 * ctx.n())
}

/// Variance of the two-component cat formed at `t = π/2ν`, for labels `(φ, v)`.
pub fn cat_variance(phi: f64, v: f64, parity: Parity, q: Quadrature) -> f64 {
    let overlap = (-2.0 * (phi * phi + v * v)).exp();
    let squeezed_in_phi = |along: f64, across: f64| 0.5 + along * along - overlap * across * across;
    match (parity, q) {
        (Parity::Even, Quadrature::Phi) | (Parity::Odd, Quadrature::V) => squeezed_in_phi(phi, v),
        (Parity::Even, Quadrature::V) | (Parity::Odd, Quadrature::Phi) => squeezed_in_phi(v, phi),
    }
}

/// Fractional-revival decomposition at `t = πp/(νq)` into `m` coherent
/// components of equal magnitude.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CatDecomposition {
    pub p: u32,
    pub q: u32,
    pub m: u32,
    pub coefficients: Vec<Complex64>,
    /// Phase of the l-th component relative to `α`.
    pub component_phases: Vec<f64>,
    pub components: Vec<Amplitude>,
}

impl CatDecomposition {
    /// Evolution time at which the decomposition holds, for Kerr rate `ν`.
    pub fn time(&self, kerr_rate: f64) -> f64 {
        PI * self.p as f64 / (kerr_rate * self.q as f64)
    }

    /// `Σ_l c_l |α_l⟩` truncated at `dim`, without renormalization.
    pub fn superpose(&self, dim: usize) -> Vec<Complex64> {
        let mut amps = vec![Complex64::new(0.0, 0.0); dim];
        for (c, alpha) in self.coefficients.iter().zip(&self.components) {
            for (acc, a) in amps.iter_mut().zip(coherent_amplitudes(*alpha, dim)) {
                *acc += c * a;
            }
        }
        amps
    }
}

fn gcd(a: u32, b: u32) -> u32 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Gauss-sum coefficients `c_l = (1/m) Σ_r e^{iπr(pr/q − 2l/m)}` and
/// component labels `α e^{−iπ(Ωp/νq − 2l/m)}`, with `m = 2q` when `p` and `q`
/// are both odd and `m = q` otherwise.
pub fn cat_decomposition(
    p: u32,
    q: u32,
    rotation_over_kerr: f64,
    alpha: Amplitude,
) -> Result<CatDecomposition> {
    if p == 0 || q == 0 || p > q || (p == q && p != 1) {
        return Err(AnalyticError::InvalidArgument(format!(
            "need 0 < p < q (or p = q = 1), got p = {p}, q = {q}"
        )));
    }
    if gcd(p, q) != 1 {
        return Err(AnalyticError::NotCoprime { p, q });
    }
    let m = if p % 2 == 1 && q % 2 == 1 { 2 * q } else { q };
    let (pf, qf, mf) = (p as f64, q as f64, m as f64);
    let coefficients: Vec<Complex64> = (0..m)
        .map(|l| {
            let lf = l as f64;
            (0..m)
                .map(|r| {
                    let rf = r as f64;
                    Complex64::from_polar(1.0, PI * rf * (pf * rf / qf - 2.0 * lf / mf))
                })
                .sum::<Complex64>()
                / mf
        })
        .collect();
    let component_phases: Vec<f64> = (0..m)
        .map(|l| -PI * (rotation_over_kerr * pf / qf - 2.0 * l as f64 / mf))
        .collect();
    let components = component_phases.iter().map(|&ph| alpha.rotate(ph)).collect();
    Ok(CatDecomposition { p, q, m, coefficients, component_phases, components })
}

/// Bob's noise `C_AB(X) = ⟨(X^B − X^A)²⟩` for Alice's state `|α⟩` measured
/// after storage time `t`.
pub fn noise_cab(
    alpha: Amplitude,
    rotation_rate: f64,
    kerr_rate: f64,
    t: f64,
    q: Quadrature,
) -> Result<f64> {
    check_rates(kerr_rate, t)?;
    let ctx = KerrPhaseContext::new(alpha, rotation_rate, kerr_rate, t);
    let (a, b) = (ctx.alpha, ctx.beta);
    let base = 1.0 + 2.0 * ctx.n();
    let squeeze = a * a * ctx.second_order() - b * b * ctx.second_order_conj();
    let value = match q {
        Quadrature::Phi => {
            let re = a.re;
            let cross = ctx.rotation() * (a * ctx.first_order() + a.conj() * ctx.first_order_conj());
            0.5 * (base + 4.0 * re * re - 4.0 * re * cross + squeeze)
        }
        Quadrature::V => {
            let im = a.im;
            let cross = ctx.rotation() * (b * ctx.first_order_conj() + b.conj() * ctx.first_order());
            0.5 * (base + 4.0 * im * im - 4.0 * im * cross - squeeze)
        }
    };
    real_part(value, base + 4.0 * a.norm_sqr())
}

/// Bob's noise averaged over Alice's zero-centred Gaussian ensemble with
/// `V_A N₀ = 1/2`; identical for both quadratures.
pub fn ensemble_noise(rotation_rate: f64, kerr_rate: f64, t: f64) -> f64 {
    let (w, o) = (kerr_rate, rotation_rate);
    let numerator = 9.0 * (t * (w - o)).cos() - 6.0 * (t * (w + o)).cos() + (t * (3.0 * w + o)).cos();
    let denominator = 5.0 - 3.0 * (2.0 * w * t).cos();
    1.5 - numerator / (denominator * denominator)
}

/// [`ensemble_noise`] averaged over one revival period `[0, 2π/ν]`.
pub fn time_avg_noise(rotation_rate: f64, kerr_rate: f64) -> f64 {
    let period = 2.0 * PI / kerr_rate;
    let integral = integrate_adaptive(
        |t| ensemble_noise(rotation_rate, kerr_rate, t),
        0.0,
        period,
        1e-8,
        1e-14,
        20_000,
    );
    integral.value / period
}
