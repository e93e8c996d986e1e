//! Time-domain simulation of the true system and the one-step predictor.

use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::poly::conv;

/// Simulate `A(q) y = B(q)/F(q) u + C(q)/D(q) e` from rest (all signals zero
/// before n = 0), via the auxiliary recursions
/// `w_n = sum b_j u_{n-j} - sum f_j w_{n-j}` and the noise filter
/// `t_n = e_n + sum c_j e_{n-j} - sum d_j t_{n-j}`.
pub fn simulate_system(params: &ModelParams, u: &[f64], e: &[f64]) -> Result<Vec<f64>> {
    params.require_assumption1()?;
    if u.len() != e.len() {
        return Err(Error::Shape(format!(
            "input length {} != noise length {}",
            u.len(),
            e.len()
        )));
    }
    let n = u.len();
    let ac = params.a().coeffs();
    let bc = params.b().coeffs();
    let fc = params.f().coeffs();
    let cc = params.c().coeffs();
    let dc = params.d().coeffs();

    let mut w = vec![0.0; n];
    let mut t = vec![0.0; n];
    let mut y = vec![0.0; n];
    let lag = |sig: &[f64], n: usize, j: usize| if n >= j { sig[n - j] } else { 0.0 };

    for k in 0..n {
        let mut wk = 0.0;
        for (j, &b) in bc.iter().enumerate() {
            wk += b * lag(u, k, j + 1);
        }
        for (j, &f) in fc.iter().enumerate() {
            wk -= f * lag(&w, k, j + 1);
        }
        w[k] = wk;

        let mut tk = e[k];
        for (j, &c) in cc.iter().enumerate() {
            tk += c * lag(e, k, j + 1);
        }
        for (j, &d) in dc.iter().enumerate() {
            tk -= d * lag(&t, k, j + 1);
        }
        t[k] = tk;

        let mut yk = w[k] + t[k];
        for (j, &a) in ac.iter().enumerate() {
            yk -= a * lag(&y, k, j + 1);
        }
        y[k] = yk;
    }
    Ok(y)
}

/// One-step predictor for the model at `theta`, driven by measured data:
/// `C F yhat_n = F [C - D A] y_n + D B u_n`.
pub fn predict_one_step(theta: &ModelParams, y: &[f64], u: &[f64]) -> Result<Vec<f64>> {
    theta.require_predictor_stable()?;
    if y.len() != u.len() {
        return Err(Error::Shape(format!(
            "output length {} != input length {}",
            y.len(),
            u.len()
        )));
    }
    let cf = conv(&theta.c().series(), &theta.f().series());
    let da = conv(&theta.d().series(), &theta.a().series());
    let mut c_minus_da = theta.c().series();
    if c_minus_da.len() < da.len() {
        c_minus_da.resize(da.len(), 0.0);
    }
    for (ci, di) in c_minus_da.iter_mut().zip(da.iter()) {
        *ci -= di;
    }
    let rhs_y = conv(&theta.f().series(), &c_minus_da);
    let rhs_u = conv(&theta.d().series(), &theta.b().series());

    let n = y.len();
    let mut yhat = vec![0.0; n];
    let lag = |sig: &[f64], n: usize, j: usize| if n >= j { sig[n - j] } else { 0.0 };
    for k in 0..n {
        // All three series have zero constant term, so the recursion is causal.
        let mut v = 0.0;
        for (j, &c) in rhs_y.iter().enumerate().skip(1) {
            v += c * lag(y, k, j);
        }
        for (j, &c) in rhs_u.iter().enumerate().skip(1) {
            v += c * lag(u, k, j);
        }
        for (j, &c) in cf.iter().enumerate().skip(1) {
            v -= c * lag(&yhat, k, j);
        }
        yhat[k] = v;
    }
    Ok(yhat)
}
