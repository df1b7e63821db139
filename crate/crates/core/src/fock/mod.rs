//! Truncated Fock-space representation of a single oscillator mode.
//!
//! The quadratures follow `Φ = (b + b†)/√2` and `V = i(b† − b)/√2`, so the
//! vacuum variance is `N₀ = 1/2` and a coherent state labelled `(φ, v)` has
//! amplitude `α = (φ + i v)/√2`.

mod homodyne;

pub use homodyne::{homodyne_sample, quadrature_pdf, HomodyneSampler, DEFAULT_GRID_POINTS};

use std::f64::consts::FRAC_1_SQRT_2;
use std::fmt;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Vacuum quadrature variance in the dimensionless convention used throughout.
pub const VACUUM_NOISE: f64 = 0.5;

/// Number of top Fock levels whose population counts as tail mass.
pub const TAIL_WINDOW: usize = 5;

/// Tail mass above which a state is not considered well truncated.
pub const TAIL_TOLERANCE: f64 = 1e-12;

const NORM_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FockError {
    #[error("truncation dimension {dim} too small: {reason}")]
    TruncationTooSmall { dim: usize, reason: String },
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("quadrature grid too narrow: integrated density {integral:.6}")]
    GridTooNarrow { integral: f64 },
    #[error("invalid state: {0}")]
    InvalidState(String),
}

pub type Result<T> = std::result::Result<T, FockError>;

/// Which quadrature a homodyne detector measures.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Quadrature {
    /// Flux, `(b + b†)/√2`.
    Phi,
    /// Voltage, `i(b† − b)/√2`.
    V,
}

impl Quadrature {
    pub const BOTH: [Quadrature; 2] = [Quadrature::Phi, Quadrature::V];

    /// Projection of a coherent label onto this quadrature.
    pub fn project(self, alpha: Amplitude) -> f64 {
        match self {
            Quadrature::Phi => alpha.phi(),
            Quadrature::V => alpha.v(),
        }
    }
}

impl fmt::Display for Quadrature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Quadrature::Phi => f.write_str("Phi"),
            Quadrature::V => f.write_str("V"),
        }
    }
}

/// Coherent-state amplitude `α`, labelled by its quadrature means `(φ, v)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Amplitude(pub Complex64);

impl Amplitude {
    pub const ZERO: Amplitude = Amplitude(Complex64::new(0.0, 0.0));

    pub fn new(re: f64, im: f64) -> Self {
        Amplitude(Complex64::new(re, im))
    }

    /// `α = (φ + i v)/√2`.
    pub fn from_labels(phi: f64, v: f64) -> Self {
        Amplitude(Complex64::new(phi, v) * FRAC_1_SQRT_2)
    }

    pub fn phi(self) -> f64 {
        self.0.re * std::f64::consts::SQRT_2
    }

    pub fn v(self) -> f64 {
        self.0.im * std::f64::consts::SQRT_2
    }

    pub fn norm_sqr(self) -> f64 {
        self.0.norm_sqr()
    }

    pub fn scale(self, factor: f64) -> Self {
        Amplitude(self.0 * factor)
    }

    /// Phase-space rotation `α → α e^{iθ}`.
    pub fn rotate(self, theta: f64) -> Self {
        Amplitude(self.0 * Complex64::from_polar(1.0, theta))
    }

    pub fn is_finite(self) -> bool {
        self.0.re.is_finite() && self.0.im.is_finite()
    }
}

impl std::ops::Neg for Amplitude {
    type Output = Amplitude;
    fn neg(self) -> Amplitude {
        Amplitude(-self.0)
    }
}

/// Smallest dimension accepted by [`FockVector::coherent`] for `α`.
pub fn minimum_dim(alpha: Amplitude) -> f64 {
    let n = alpha.norm_sqr();
    n + 10.0 * (n + 1.0).sqrt()
}

/// Truncation rule with a margin of 20 levels over [`minimum_dim`].
pub fn recommended_dim(alpha: Amplitude) -> usize {
    (minimum_dim(alpha) + 20.0).ceil() as usize
}

/// First two moments of a quadrature.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    pub mean: f64,
    pub variance: f64,
}

/// Normal-ordered ladder expectations `⟨b⟩`, `⟨b²⟩` and `⟨b†b⟩`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LadderMoments {
    pub b: Complex64,
    pub b2: Complex64,
    pub number: f64,
}

impl LadderMoments {
    pub fn quadrature(&self, q: Quadrature) -> Moments {
        let sqrt2 = std::f64::consts::SQRT_2;
        match q {
            Quadrature::Phi => {
                let mean = sqrt2 * self.b.re;
                let second = self.b2.re + self.number + 0.5;
                Moments { mean, variance: second - mean * mean }
            }
            Quadrature::V => {
                let mean = sqrt2 * self.b.im;
                let second = -self.b2.re + self.number + 0.5;
                Moments { mean, variance: second - mean * mean }
            }
        }
    }
}

/// Normalized amplitude vector over number states `|0⟩ … |dim−1⟩`.
#[derive(Clone, Debug, PartialEq)]
pub struct FockVector {
    amps: Vec<Complex64>,
}

impl FockVector {
    /// Builds a state from raw amplitudes, renormalizing them.
    pub fn from_amplitudes(mut amps: Vec<Complex64>) -> Result<Self> {
        if amps.is_empty() {
            return Err(FockError::InvalidState("empty amplitude vector".into()));
        }
        let norm = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if !norm.is_finite() || norm == 0.0 {
            return Err(FockError::InvalidState(format!("norm {norm}")));
        }
        for a in &mut amps {
            *a /= norm;
        }
        Ok(FockVector { amps })
    }

    pub fn vacuum(dim: usize) -> Self {
        Self::number_state(0, dim)
    }

    pub fn number_state(n: usize, dim: usize) -> Self {
        assert!(n < dim, "number state {n} outside dimension {dim}");
        let mut amps = vec![Complex64::new(0.0, 0.0); dim];
        amps[n] = Complex64::new(1.0, 0.0);
        FockVector { amps }
    }

    /// Coherent state `e^{−|α|²/2} Σ αⁿ/√n! |n⟩`, renormalized on the
    /// truncated space.
    pub fn coherent(alpha: Amplitude, dim: usize) -> Result<Self> {
        if !alpha.is_finite() {
            return Err(FockError::InvalidState(format!("non-finite amplitude {:?}", alpha.0)));
        }
        let required = minimum_dim(alpha);
        if (dim as f64) < required {
            return Err(FockError::TruncationTooSmall {
                dim,
                reason: format!("|α|² = {:.3} needs at least {}", alpha.norm_sqr(), required.ceil()),
            });
        }
        Self::from_amplitudes(coherent_amplitudes(alpha, dim))
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    /// Population of the top [`TAIL_WINDOW`] levels.
    pub fn tail_mass(&self) -> f64 {
        let start = self.dim().saturating_sub(TAIL_WINDOW);
        self.amps[start..].iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn is_well_truncated(&self) -> bool {
        self.tail_mass() < TAIL_TOLERANCE
    }

    /// Applies `e^{iλ(b + b†)}`, which shifts `α → α + iλ` (a pure `V`
    /// displacement of `√2 λ`).
    ///
    /// The exponential is taken of the truncated generator matrix, so any
    /// population pushed against the cutoff shows up as tail mass and is
    /// rejected.
    pub fn displace(&self, lambda: f64) -> Result<Self> {
        if lambda == 0.0 {
            return Ok(self.clone());
        }
        let dim = self.dim();
        let mut generator = DMatrix::<Complex64>::zeros(dim, dim);
        for n in 1..dim {
            let element = Complex64::new(0.0, lambda * (n as f64).sqrt());
            generator[(n, n - 1)] = element;
            generator[(n - 1, n)] = element;
        }
        let propagator = generator.exp();
        let input = nalgebra::DVector::from_column_slice(&self.amps);
        let out = FockVector { amps: (propagator * input).as_slice().to_vec() };
        let tail = out.tail_mass();
        if tail > TAIL_TOLERANCE {
            return Err(FockError::TruncationTooSmall {
                dim,
                reason: format!("displaced tail mass {tail:.3e}"),
            });
        }
        Ok(out)
    }

    /// `e^{−iθ b†b}`: rotates `α → α e^{−iθ}`.
    pub fn rotate(&self, theta: f64) -> Self {
        self.diagonal_phase(|n| -theta * n)
    }

    /// Storage evolution `e^{−iΩ b†b t} e^{iν (b†b)² t}`, exact in the number basis.
    pub fn kerr_evolve(&self, rotation_rate: f64, kerr_rate: f64, t: f64) -> Self {
        self.diagonal_phase(|n| n * (kerr_rate * n * t - rotation_rate * t))
    }

    /// Multiplies each amplitude by `e^{i phase(n)}`.
    pub fn diagonal_phase(&self, phase: impl Fn(f64) -> f64) -> Self {
        let amps = self
            .amps
            .iter()
            .enumerate()
            .map(|(n, a)| a * Complex64::from_polar(1.0, phase(n as f64)))
            .collect();
        FockVector { amps }
    }

    /// `⟨b⟩`, `⟨b²⟩`, `⟨b†b⟩` from the off-diagonal structure of `b`.
    pub fn ladder_moments(&self) -> LadderMoments {
        let a = &self.amps;
        let mut b = Complex64::new(0.0, 0.0);
        let mut b2 = Complex64::new(0.0, 0.0);
        let mut number = 0.0;
        for n in 1..a.len() {
            let nf = n as f64;
            b += a[n - 1].conj() * a[n] * nf.sqrt();
            number += nf * a[n].norm_sqr();
            if n >= 2 {
                b2 += a[n - 2].conj() * a[n] * (nf * (nf - 1.0)).sqrt();
            }
        }
        LadderMoments { b, b2, number }
    }

    pub fn quadrature_moments(&self, q: Quadrature) -> Moments {
        self.ladder_moments().quadrature(q)
    }

    /// `Σ conj(self[n]) other[n]`.
    pub fn overlap(&self, other: &FockVector) -> Result<Complex64> {
        if self.dim() != other.dim() {
            return Err(FockError::DimensionMismatch(self.dim(), other.dim()));
        }
        Ok(self.amps.iter().zip(&other.amps).map(|(a, b)| a.conj() * b).sum())
    }

    /// Amplitudes of the state as seen by a detector of quadrature `q`: the
    /// `V` quadrature is measured as `Φ` after a quarter-turn rotation.
    pub(crate) fn amplitudes_for(&self, q: Quadrature) -> std::borrow::Cow<'_, [Complex64]> {
        match q {
            Quadrature::Phi => std::borrow::Cow::Borrowed(&self.amps),
            Quadrature::V => {
                std::borrow::Cow::Owned(self.rotate(std::f64::consts::FRAC_PI_2).amps)
            }
        }
    }

    pub(crate) fn check_normalized(&self) -> Result<()> {
        let norm = self.norm_sqr();
        if (norm - 1.0).abs() > NORM_TOLERANCE {
            return Err(FockError::InvalidState(format!("norm² = {norm}")));
        }
        Ok(())
    }
}

/// Unnormalized coherent amplitudes truncated at `dim`.
pub fn coherent_amplitudes(alpha: Amplitude, dim: usize) -> Vec<Complex64> {
    let mut amps = Vec::with_capacity(dim);
    let mut current = Complex64::new((-alpha.norm_sqr() / 2.0).exp(), 0.0);
    for n in 0..dim {
        if n > 0 {
            current *= alpha.0 / (n as f64).sqrt();
        }
        amps.push(current);
    }
    amps
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn vacuum_coherent_state() {
        let s = FockVector::coherent(Amplitude::ZERO, 16).unwrap();
        assert_eq!(s.amplitudes()[0], Complex64::new(1.0, 0.0));
        assert!(s.amplitudes()[1..].iter().all(|a| a.norm() == 0.0));
    }

    #[test]
    fn coherent_means_match_labels() {
        let s = FockVector::coherent(Amplitude::from_labels(0.3, 0.3), 32).unwrap();
        // independent summation: ⟨b⟩ = Σ conj(c_{n-1}) c_n √n with c_n = e^{-|α|²/2} αⁿ/√n!
        let alpha = Complex64::new(0.3, 0.3) / 2f64.sqrt();
        let mut c = vec![Complex64::new((-alpha.norm_sqr() / 2.0).exp(), 0.0)];
        for n in 1..32 {
            let prev = c[n - 1];
            c.push(prev * alpha / (n as f64).sqrt());
        }
        let b: Complex64 = (1..32).map(|n| c[n - 1].conj() * c[n] * (n as f64).sqrt()).sum();
        assert!(close(2f64.sqrt() * b.re, 0.3, 1e-10));
        assert!(close(s.quadrature_moments(Quadrature::Phi).mean, 0.3, 1e-10));
        assert!(close(s.quadrature_moments(Quadrature::V).mean, 0.3, 1e-10));
    }

    #[test]
    fn large_coherent_state_is_well_truncated() {
        let s = FockVector::coherent(Amplitude::new(4.0, 0.0), 64).unwrap();
        assert!(close(s.norm_sqr(), 1.0, 1e-10));
        // Poisson(16) mass above n = 59
        let mut p = (-16f64).exp();
        let mut tail = 0.0;
        for n in 1..200 {
            p *= 16.0 / n as f64;
            if n >= 59 {
                tail += p;
            }
        }
        assert!(tail < 1e-12);
        assert!(s.tail_mass() < 1e-12);
    }

    #[test]
    fn truncation_too_small_is_rejected() {
        let err = FockVector::coherent(Amplitude::new(4.0, 0.0), 40).unwrap_err();
        assert!(matches!(err, FockError::TruncationTooSmall { dim: 40, .. }));
    }

    #[test]
    fn zero_displacement_is_identity() {
        let s = FockVector::coherent(Amplitude::new(0.4, -0.2), 32).unwrap();
        assert_eq!(s.displace(0.0).unwrap(), s);
    }

    #[test]
    fn displacement_moves_only_v() {
        let phi_a = 0.3;
        let s = FockVector::vacuum(32).displace(phi_a / 2f64.sqrt()).unwrap();
        let phi = s.quadrature_moments(Quadrature::Phi);
        let v = s.quadrature_moments(Quadrature::V);
        assert!(close(v.mean, phi_a, 1e-9));
        assert!(close(phi.mean, 0.0, 1e-9));
    }

    #[test]
    fn displacement_matches_coherent_label() {
        for &(re, im, lambda) in &[(0.5, 0.1, 0.7), (-1.0, 0.3, -1.2), (0.0, 2.0, 0.4)] {
            let alpha = Amplitude::new(re, im);
            let dim = recommended_dim(Amplitude::new(re, im + lambda));
            let s = FockVector::coherent(alpha, dim).unwrap().displace(lambda).unwrap();
            let expected = FockVector::coherent(Amplitude::new(re, im + lambda), dim).unwrap();
            assert!(close(s.overlap(&expected).unwrap().norm(), 1.0, 1e-9));
        }
    }

    #[test]
    fn displacement_detects_truncation() {
        let err = FockVector::vacuum(12).displace(3.0).unwrap_err();
        assert!(matches!(err, FockError::TruncationTooSmall { .. }));
    }

    #[test]
    fn quarter_rotation_swaps_quadratures() {
        let s = FockVector::coherent(Amplitude::from_labels(0.0, 0.3), 32).unwrap();
        let r = s.rotate(FRAC_PI_2);
        assert!(close(r.quadrature_moments(Quadrature::Phi).mean, 0.3, 1e-12));
        assert!(close(r.quadrature_moments(Quadrature::V).mean, 0.0, 1e-12));
    }

    #[test]
    fn full_rotation_is_identity() {
        let s = FockVector::coherent(Amplitude::new(1.2, -0.4), 40).unwrap();
        assert!(close(s.rotate(0.0).overlap(&s).unwrap().norm(), 1.0, 1e-15));
        assert!(close(s.rotate(2.0 * PI).overlap(&s).unwrap().norm(), 1.0, 1e-12));
    }

    #[test]
    fn kerr_half_period_flips_sign_for_even_ratio() {
        let nu = 1.0;
        let alpha = Amplitude::new(1.5, 0.7);
        let dim = recommended_dim(alpha);
        let s = FockVector::coherent(alpha, dim).unwrap();
        let flipped = FockVector::coherent(-alpha, dim).unwrap();
        let e = s.kerr_evolve(4.0 * nu, nu, PI / nu);
        assert!(close(e.overlap(&flipped).unwrap().norm(), 1.0, 1e-9));
        let full = s.kerr_evolve(4.0 * nu, nu, 2.0 * PI / nu);
        assert!(close(full.overlap(&s).unwrap().norm(), 1.0, 1e-9));
        assert_eq!(s.kerr_evolve(4.0, 1.0, 0.0), s);
    }

    #[test]
    fn vacuum_moments() {
        let m = FockVector::vacuum(8).quadrature_moments(Quadrature::Phi);
        assert_eq!(m.mean, 0.0);
        assert_eq!(m.variance, 0.5);
        let m = FockVector::vacuum(8).quadrature_moments(Quadrature::V);
        assert_eq!(m.variance, 0.5);
    }

    #[test]
    fn coherent_variances_are_vacuum() {
        let s = FockVector::coherent(Amplitude::from_labels(0.3, 0.3), 32).unwrap();
        for q in Quadrature::BOTH {
            let m = s.quadrature_moments(q);
            assert!(close(m.mean, 0.3, 1e-10));
            assert!(close(m.variance, 0.5, 1e-10));
        }
    }

    #[test]
    fn overlap_cases() {
        let s = FockVector::coherent(Amplitude::new(0.2, 0.9), 30).unwrap();
        assert!(close(s.overlap(&s).unwrap().re, 1.0, 1e-14));
        let a = FockVector::number_state(2, 10);
        let b = FockVector::number_state(3, 10);
        assert_eq!(a.overlap(&b).unwrap(), Complex64::new(0.0, 0.0));
        assert_eq!(a.overlap(&FockVector::vacuum(11)), Err(FockError::DimensionMismatch(10, 11)));
    }

    #[test]
    fn opposite_coherent_overlap() {
        for &r in &[0.5, 1.0, 2.0, 3.0] {
            let alpha = Amplitude::new(r * 0.6, r * 0.8);
            let dim = recommended_dim(alpha);
            let a = FockVector::coherent(alpha, dim).unwrap();
            let b = FockVector::coherent(-alpha, dim).unwrap();
            // Σ (−1)ⁿ |α|^{2n}/n! · e^{−|α|²} by direct series
            let x = r * r;
            let mut term = (-x).exp();
            let mut series = term;
            for n in 1..200 {
                term *= -x / n as f64;
                series += term;
            }
            let got = a.overlap(&b).unwrap().norm();
            assert!(close(got, series.abs(), 1e-10));
            assert!(close(got, (-2.0 * x).exp(), 1e-10));
        }
    }
}
