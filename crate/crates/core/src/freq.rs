//! Frequency-domain transfer functions of the prediction-error gradient.
//!
//! The gradient process decomposes as
//! `eps_theta,n = F_u(q, theta) u_n + F_e(q, theta) e_n`
//! with data generated by the true system; the component table mirrors the
//! lag structure of the regressor stacks, block ordering `[A|B|F|C|D]`.

use nalgebra::DVector;
use num_complex::Complex64;

use crate::error::Result;
use crate::model::ModelParams;

/// Evaluation context binding the predictor parameter to the data-generating
/// system.
pub struct FreqModel<'a> {
    theta: &'a ModelParams,
    truth: &'a ModelParams,
}

fn lag_vector(p: usize, zinv: Complex64) -> Vec<Complex64> {
    let mut v = Vec::with_capacity(p);
    let mut acc = Complex64::new(1.0, 0.0);
    for _ in 0..p {
        acc *= zinv;
        v.push(acc);
    }
    v
}

impl<'a> FreqModel<'a> {
    pub fn new(theta: &'a ModelParams, truth: &'a ModelParams) -> Result<Self> {
        truth.require_assumption1()?;
        theta.require_predictor_stable()?;
        Ok(Self { theta, truth })
    }

    /// Transfer function of the true system from u to y.
    fn g_star(&self, zinv: Complex64) -> Complex64 {
        self.truth.b().eval_zinv(zinv)
            / (self.truth.a().eval_zinv(zinv) * self.truth.f().eval_zinv(zinv))
    }

    /// Transfer function of the true system from e to y.
    fn h_star(&self, zinv: Complex64) -> Complex64 {
        self.truth.c().eval_zinv(zinv)
            / (self.truth.a().eval_zinv(zinv) * self.truth.d().eval_zinv(zinv))
    }

    /// Gradient transfer vector from the input, stacked `[A|B|F|C|D]`.
    pub fn f_u(&self, omega: f64) -> DVector<Complex64> {
        let zinv = Complex64::from_polar(1.0, -omega);
        let o = self.theta.orders();
        let g = self.g_star(zinv);
        let f_wu = self.theta.b().eval_zinv(zinv) / self.theta.f().eval_zinv(zinv);
        let f_vu = self.theta.a().eval_zinv(zinv) * g - f_wu;
        let f_eps_u = self.theta.d().eval_zinv(zinv) / self.theta.c().eval_zinv(zinv) * f_vu;

        let mut out = Vec::with_capacity(o.p_theta());
        for l in lag_vector(o.pa, zinv) {
            out.push(l * g);
        }
        for l in lag_vector(o.pb, zinv) {
            out.push(-l);
        }
        for l in lag_vector(o.pf, zinv) {
            out.push(l * f_wu);
        }
        for l in lag_vector(o.pc, zinv) {
            out.push(-l * f_eps_u);
        }
        for l in lag_vector(o.pd, zinv) {
            out.push(l * f_vu);
        }
        DVector::from_vec(out)
    }

    /// Gradient transfer vector from the noise.
    pub fn f_e(&self, omega: f64) -> DVector<Complex64> {
        let zinv = Complex64::from_polar(1.0, -omega);
        let o = self.theta.orders();
        let h = self.h_star(zinv);
        let a_t = self.theta.a().eval_zinv(zinv);
        let f_eps_e =
            self.theta.d().eval_zinv(zinv) * a_t / self.theta.c().eval_zinv(zinv) * h;
        let f_ve = a_t * h;

        let zero = Complex64::new(0.0, 0.0);
        let mut out = Vec::with_capacity(o.p_theta());
        for l in lag_vector(o.pa, zinv) {
            out.push(l * h);
        }
        for _ in 0..o.pb {
            out.push(zero);
        }
        for _ in 0..o.pf {
            out.push(zero);
        }
        for l in lag_vector(o.pc, zinv) {
            out.push(-l * f_eps_e);
        }
        for l in lag_vector(o.pd, zinv) {
            out.push(l * f_ve);
        }
        DVector::from_vec(out)
    }

    /// Scalar transfer functions of the prediction error itself from
    /// `(u, e)`: `eps = (D/C)(A y - (B/F) u)` with y from the true system.
    pub fn eps_transfers(&self, omega: f64) -> (Complex64, Complex64) {
        let zinv = Complex64::from_polar(1.0, -omega);
        let g = self.g_star(zinv);
        let h = self.h_star(zinv);
        let a_t = self.theta.a().eval_zinv(zinv);
        let dc = self.theta.d().eval_zinv(zinv) / self.theta.c().eval_zinv(zinv);
        let f_wu = self.theta.b().eval_zinv(zinv) / self.theta.f().eval_zinv(zinv);
        (dc * (a_t * g - f_wu), dc * a_t * h)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn error_transfers_collapse_at_truth() {
        let truth = ModelParams::ararx(&[0.9, 0.6, 0.2, 0.3], &[-1.2, 0.75, -0.2]);
        let fm = FreqModel::new(&truth, &truth).unwrap();
        for k in 0..16 {
            let w = std::f64::consts::PI * (k as f64 / 8.0 - 1.0);
            let (fu, fe) = fm.eps_transfers(w);
            assert!(fu.norm() < 1e-12, "eps-from-u should vanish at truth");
            assert!((fe - Complex64::new(1.0, 0.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn gradient_vector_blocks_vanish_at_truth() {
        // At the true parameters the v-component of f_u and everything but
        // the noise blocks of f_e vanish for the ARARX structure.
        let truth = ModelParams::ararx(&[0.9, 0.6, 0.2, 0.3], &[-1.2, 0.75, -0.2]);
        let fm = FreqModel::new(&truth, &truth).unwrap();
        let w = 0.73;
        let fu = fm.f_u(w);
        let fe = fm.f_e(w);
        for i in 4..7 {
            assert!(fu[i].norm() < 1e-12, "f_u v-block at truth");
            assert!(fe[i].norm() > 0.0);
        }
        for i in 0..4 {
            assert!(fe[i].norm() == 0.0, "f_e u-block is structurally zero");
        }
    }
}
