//! The SISO LTI model class
//! `A(q) y_n = B(q)/F(q) u_n + C(q)/D(q) e_n`
//! and its parameter vector `theta = [theta_A | theta_B | theta_F | theta_C | theta_D]`.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::poly::{PolyKind, PolynomialCoeffs};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModelOrders {
    pub pa: usize,
    pub pb: usize,
    pub pf: usize,
    pub pc: usize,
    pub pd: usize,
}

impl ModelOrders {
    pub fn p_theta(&self) -> usize {
        self.pa + self.pb + self.pf + self.pc + self.pd
    }
}

/// Parameter vector of the model, one coefficient block per polynomial.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    a: PolynomialCoeffs,
    b: PolynomialCoeffs,
    f: PolynomialCoeffs,
    c: PolynomialCoeffs,
    d: PolynomialCoeffs,
}

impl ModelParams {
    pub fn new(
        a: PolynomialCoeffs,
        b: PolynomialCoeffs,
        f: PolynomialCoeffs,
        c: PolynomialCoeffs,
        d: PolynomialCoeffs,
    ) -> Result<Self> {
        if a.kind() != PolyKind::Monic
            || f.kind() != PolyKind::Monic
            || c.kind() != PolyKind::Monic
            || d.kind() != PolyKind::Monic
        {
            return Err(Error::Shape("A, F, C, D must be monic".into()));
        }
        if b.kind() != PolyKind::ZeroConstant {
            return Err(Error::Shape("B must have zero constant term".into()));
        }
        Ok(Self { a, b, f, c, d })
    }

    /// ARARX structure: `y = B(q) u + e / D(q)` with `p_a = p_c = p_f = 0`.
    pub fn ararx(theta_b: &[f64], theta_d: &[f64]) -> Self {
        Self {
            a: PolynomialCoeffs::one(),
            b: PolynomialCoeffs::fir(theta_b.to_vec()),
            f: PolynomialCoeffs::one(),
            c: PolynomialCoeffs::one(),
            d: PolynomialCoeffs::monic(theta_d.to_vec()),
        }
    }

    /// All-zero parameter vector for the given orders.
    pub fn zero(orders: ModelOrders) -> Self {
        Self {
            a: PolynomialCoeffs::monic(vec![0.0; orders.pa]),
            b: PolynomialCoeffs::fir(vec![0.0; orders.pb]),
            f: PolynomialCoeffs::monic(vec![0.0; orders.pf]),
            c: PolynomialCoeffs::monic(vec![0.0; orders.pc]),
            d: PolynomialCoeffs::monic(vec![0.0; orders.pd]),
        }
    }

    pub fn orders(&self) -> ModelOrders {
        ModelOrders {
            pa: self.a.order(),
            pb: self.b.order(),
            pf: self.f.order(),
            pc: self.c.order(),
            pd: self.d.order(),
        }
    }

    pub fn p_theta(&self) -> usize {
        self.orders().p_theta()
    }

    pub fn a(&self) -> &PolynomialCoeffs {
        &self.a
    }
    pub fn b(&self) -> &PolynomialCoeffs {
        &self.b
    }
    pub fn f(&self) -> &PolynomialCoeffs {
        &self.f
    }
    pub fn c(&self) -> &PolynomialCoeffs {
        &self.c
    }
    pub fn d(&self) -> &PolynomialCoeffs {
        &self.d
    }

    /// Flatten to the single vector `[theta_A | theta_B | theta_F | theta_C | theta_D]`.
    pub fn flatten(&self) -> DVector<f64> {
        let mut v = Vec::with_capacity(self.p_theta());
        v.extend_from_slice(self.a.coeffs());
        v.extend_from_slice(self.b.coeffs());
        v.extend_from_slice(self.f.coeffs());
        v.extend_from_slice(self.c.coeffs());
        v.extend_from_slice(self.d.coeffs());
        DVector::from_vec(v)
    }

    /// Inverse of [`flatten`](Self::flatten) for fixed orders.
    pub fn from_vector(orders: ModelOrders, v: &DVector<f64>) -> Result<Self> {
        if v.len() != orders.p_theta() {
            return Err(Error::Shape(format!(
                "parameter vector has length {}, expected {}",
                v.len(),
                orders.p_theta()
            )));
        }
        let s = v.as_slice();
        let mut at = 0usize;
        let mut take = |n: usize| {
            let out = s[at..at + n].to_vec();
            at += n;
            out
        };
        Ok(Self {
            a: PolynomialCoeffs::monic(take(orders.pa)),
            b: PolynomialCoeffs::fir(take(orders.pb)),
            f: PolynomialCoeffs::monic(take(orders.pf)),
            c: PolynomialCoeffs::monic(take(orders.pc)),
            d: PolynomialCoeffs::monic(take(orders.pd)),
        })
    }

    /// Stability of A, F, C and D (the open-loop model assumption).
    pub fn require_assumption1(&self) -> Result<()> {
        self.a.require_stable("A")?;
        self.f.require_stable("F")?;
        self.c.require_stable("C")?;
        self.d.require_stable("D")
    }

    /// Stability of C and F alone: the condition defining the predictor domain.
    pub fn predictor_stable(&self) -> bool {
        self.c.is_stable() && self.f.is_stable()
    }

    pub fn require_predictor_stable(&self) -> Result<()> {
        if self.predictor_stable() {
            Ok(())
        } else {
            Err(Error::DomainViolation(
                "C or F has a root on or outside the unit circle".into(),
            ))
        }
    }
}
