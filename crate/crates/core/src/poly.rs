//! Polynomials in the backward-shift operator `q^{-1}`.
//!
//! Two flavours appear in the model class: monic polynomials
//! `P(q) = 1 + p_1 q^{-1} + ... + p_k q^{-k}` (denominators and noise
//! colouring) and zero-constant polynomials `B(q) = b_1 q^{-1} + ... +
//! b_k q^{-k}` (the input numerator). Stability always refers to the roots
//! of `z^k P(z)` lying strictly inside the unit disc.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PolyKind {
    /// Constant term fixed to one.
    Monic,
    /// Constant term fixed to zero.
    ZeroConstant,
}

/// Coefficients `p_1 .. p_k` of a backward-shift polynomial; the constant
/// term is implied by the kind flag.
#[derive(Debug, Clone, PartialEq)]
pub struct PolynomialCoeffs {
    coeffs: Vec<f64>,
    kind: PolyKind,
}

impl PolynomialCoeffs {
    pub fn monic(coeffs: Vec<f64>) -> Self {
        Self { coeffs, kind: PolyKind::Monic }
    }

    /// Zero-constant (FIR numerator) polynomial.
    pub fn fir(coeffs: Vec<f64>) -> Self {
        Self { coeffs, kind: PolyKind::ZeroConstant }
    }

    pub fn one() -> Self {
        Self::monic(Vec::new())
    }

    pub fn order(&self) -> usize {
        self.coeffs.len()
    }

    pub fn kind(&self) -> PolyKind {
        self.kind
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// Full coefficient sequence `[p_0, p_1, ..., p_k]` starting at `q^0`.
    pub fn series(&self) -> Vec<f64> {
        let p0 = match self.kind {
            PolyKind::Monic => 1.0,
            PolyKind::ZeroConstant => 0.0,
        };
        let mut s = Vec::with_capacity(self.coeffs.len() + 1);
        s.push(p0);
        s.extend_from_slice(&self.coeffs);
        s
    }

    /// Evaluate at `q^{-1} = zinv`.
    pub fn eval_zinv(&self, zinv: Complex64) -> Complex64 {
        // Horner on the series written in powers of zinv.
        let s = self.series();
        let mut acc = Complex64::new(0.0, 0.0);
        for &c in s.iter().rev() {
            acc = acc * zinv + c;
        }
        acc
    }

    /// Roots of `z^k P(z)` (the zeros relevant for stability).
    pub fn roots(&self) -> Vec<Complex64> {
        // z^k P(z) = p0 z^k + p1 z^{k-1} + ... + pk, highest power first.
        roots_highest_first(&self.series())
    }

    /// All roots of `z^k P(z)` strictly inside the unit disc.
    pub fn is_stable(&self) -> bool {
        self.roots().iter().all(|r| r.norm() < 1.0)
    }

    pub fn require_stable(&self, name: &str) -> Result<()> {
        if self.is_stable() {
            Ok(())
        } else {
            Err(Error::Assumption1Violation(format!(
                "polynomial {name} has a root on or outside the unit circle"
            )))
        }
    }
}

/// Convolution of two coefficient sequences (polynomial product).
pub fn conv(a: &[f64], b: &[f64]) -> Vec<f64> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, &ai) in a.iter().enumerate() {
        for (j, &bj) in b.iter().enumerate() {
            out[i + j] += ai * bj;
        }
    }
    out
}

/// Companion matrix of the monic z-polynomial `z^k + c_1 z^{k-1} + ... + c_k`:
/// first row `(-c_1 .. -c_k)`, identity on the subdiagonal.
pub fn companion_from_tail(tail: &[f64]) -> DMatrix<f64> {
    let k = tail.len();
    let mut m = DMatrix::zeros(k, k);
    for (j, &c) in tail.iter().enumerate() {
        m[(0, j)] = -c;
    }
    for i in 1..k {
        m[(i, i - 1)] = 1.0;
    }
    m
}

/// Roots of a polynomial given with the highest-degree coefficient first.
/// Leading zeros are dropped; a constant has no roots.
pub fn roots_highest_first(coeffs: &[f64]) -> Vec<Complex64> {
    let lead = coeffs.iter().position(|c| c.abs() > 0.0);
    let Some(start) = lead else { return Vec::new() };
    let c = &coeffs[start..];
    if c.len() <= 1 {
        return Vec::new();
    }
    let tail: Vec<f64> = c[1..].iter().map(|x| x / c[0]).collect();
    let comp = companion_from_tail(&tail);
    comp.complex_eigenvalues().iter().copied().collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn series_and_eval() {
        let p = PolynomialCoeffs::monic(vec![-0.5]);
        assert_eq!(p.series(), vec![1.0, -0.5]);
        let v = p.eval_zinv(Complex64::new(1.0, 0.0));
        assert!((v.re - 0.5).abs() < 1e-15 && v.im.abs() < 1e-15);

        let b = PolynomialCoeffs::fir(vec![0.9, 0.6]);
        assert_eq!(b.series(), vec![0.0, 0.9, 0.6]);
    }

    #[test]
    fn roots_of_first_order() {
        let p = PolynomialCoeffs::monic(vec![0.5]);
        let r = p.roots();
        assert_eq!(r.len(), 1);
        assert!((r[0].re + 0.5).abs() < 1e-12);
        assert!(p.is_stable());

        let unstable = PolynomialCoeffs::monic(vec![-2.0]);
        assert!(!unstable.is_stable());
    }

    #[test]
    fn third_order_noise_polynomial_is_stable() {
        // z^3 - 1.2 z^2 + 0.75 z - 0.2 factors as (z - 0.5)(z^2 - 0.7 z + 0.4).
        let d = PolynomialCoeffs::monic(vec![-1.2, 0.75, -0.2]);
        let mut roots = d.roots();
        roots.sort_by(|a, b| a.norm().partial_cmp(&b.norm()).unwrap());
        assert!(d.is_stable());
        for r in &roots {
            // Polynomial evaluation at the claimed root must be near zero.
            let z = *r;
            let val = z.powu(3) - 1.2 * z.powu(2) + 0.75 * z - 0.2;
            assert!(val.norm() < 1e-10, "root residual {}", val.norm());
        }
        assert!((roots[0].norm() - 0.5).abs() < 1e-10);
    }

    #[test]
    fn conv_matches_hand_product() {
        // (1 - 0.5 q^{-1})(1 + q^{-1}) = 1 + 0.5 q^{-1} - 0.5 q^{-2}
        let p = conv(&[1.0, -0.5], &[1.0, 1.0]);
        assert_eq!(p, vec![1.0, 0.5, -0.5]);
    }

    #[test]
    fn degenerate_roots() {
        assert!(PolynomialCoeffs::one().roots().is_empty());
        assert!(PolynomialCoeffs::one().is_stable());
        // z^1 * (q^{-1}) = 1, a constant: no roots.
        let b = PolynomialCoeffs::fir(vec![1.0]);
        assert!(b.roots().is_empty());
    }
}
