//! Asymptotic quantities: the information matrix and cost gradient by
//! Parseval quadrature, the asymptotic covariance, the associated ODE of
//! the recursive scheme, and the L2-gain identities of the case study.

use nalgebra::{DMatrix, DVector};

use crate::design::{spectrum_eval, Autocorrelation};
use crate::error::{Error, Result};
use crate::estimator::TruncationDomains;
use crate::freq::FreqModel;
use crate::model::ModelParams;
use crate::poly::{PolyKind, PolynomialCoeffs};

/// Uniform quadrature grid on `[-pi, pi)`.
#[derive(Debug, Clone, Copy)]
pub struct FrequencyGrid {
    n: usize,
}

impl FrequencyGrid {
    pub fn new(n: usize) -> Result<Self> {
        if n < 64 {
            return Err(Error::Shape("frequency grid needs at least 64 points".into()));
        }
        Ok(Self { n })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn omegas(&self) -> impl Iterator<Item = f64> + '_ {
        let n = self.n;
        (0..n).map(move |k| -std::f64::consts::PI + 2.0 * std::f64::consts::PI * k as f64 / n as f64)
    }
}

impl Default for FrequencyGrid {
    fn default() -> Self {
        Self { n: 1024 }
    }
}

/// Limit covariance of the gradient process,
/// `G = (1/2pi) int (F_u F_u^H Psi_u + sigma2 F_e F_e^H) domega`,
/// by uniform quadrature (spectrally accurate for the smooth periodic
/// integrand). `truth` generates the data; `theta` is the evaluation point.
pub fn information_matrix(
    theta: &ModelParams,
    truth: &ModelParams,
    r: &Autocorrelation,
    sigma2: f64,
    grid: &FrequencyGrid,
) -> Result<DMatrix<f64>> {
    let fm = FreqModel::new(theta, truth)?;
    let p = theta.p_theta();
    let mut g = DMatrix::zeros(p, p);
    for w in grid.omegas() {
        let fu = fm.f_u(w);
        let fe = fm.f_e(w);
        let psi = spectrum_eval(r, w);
        for i in 0..p {
            for j in i..p {
                let v = (fu[i] * fu[j].conj()).re * psi + sigma2 * (fe[i] * fe[j].conj()).re;
                g[(i, j)] += v;
            }
        }
    }
    let scale = 1.0 / grid.len() as f64;
    for i in 0..p {
        for j in i..p {
            let v = g[(i, j)] * scale;
            g[(i, j)] = v;
            g[(j, i)] = v;
        }
    }
    Ok(g)
}

/// Cost gradient `W_theta = lim E[eps_theta eps]` in the frequency domain.
pub fn w_gradient(
    theta: &ModelParams,
    truth: &ModelParams,
    r: &Autocorrelation,
    sigma2: f64,
    grid: &FrequencyGrid,
) -> Result<DVector<f64>> {
    let fm = FreqModel::new(theta, truth)?;
    let p = theta.p_theta();
    let mut g = DVector::zeros(p);
    for w in grid.omegas() {
        let fu = fm.f_u(w);
        let fe = fm.f_e(w);
        let (eu, ee) = fm.eps_transfers(w);
        let psi = spectrum_eval(r, w);
        for i in 0..p {
            g[i] += (fu[i] * eu.conj()).re * psi + sigma2 * (fe[i] * ee.conj()).re;
        }
    }
    Ok(g / grid.len() as f64)
}

/// Asymptotic cost `W = (1/2) lim E[eps^2]`.
pub fn w_value(
    theta: &ModelParams,
    truth: &ModelParams,
    r: &Autocorrelation,
    sigma2: f64,
    grid: &FrequencyGrid,
) -> Result<f64> {
    let fm = FreqModel::new(theta, truth)?;
    let mut acc = 0.0;
    for w in grid.omegas() {
        let (eu, ee) = fm.eps_transfers(w);
        acc += eu.norm_sqr() * spectrum_eval(r, w) + sigma2 * ee.norm_sqr();
    }
    Ok(0.5 * acc / grid.len() as f64)
}

/// `P* = sigma2 G(theta*)^{-1}`, the limit covariance of the normalized
/// estimation error under the stationary input `r_star`.
pub fn asymptotic_covariance(
    theta_star: &ModelParams,
    r_star: &Autocorrelation,
    sigma2: f64,
) -> Result<DMatrix<f64>> {
    let grid = FrequencyGrid::default();
    let g = information_matrix(theta_star, theta_star, r_star, sigma2, &grid)?;
    let chol = nalgebra::Cholesky::new(g)
        .ok_or_else(|| Error::SingularInformation("G(theta*) is not positive definite".into()))?;
    Ok(chol.inverse() * sigma2)
}

/// One sample of the integrated ODE path.
#[derive(Debug, Clone)]
pub struct OdeSample {
    pub t: f64,
    pub theta: DVector<f64>,
    pub r_eig_min: f64,
    pub r_eig_max: f64,
    pub w: f64,
    pub grad_norm: f64,
}

/// RK4 integration of the associated ODE
/// `dtheta/dt = -R^{-1} W_theta(theta), dR/dt = G(theta) - R`,
/// with the input spectrum supplied by `r_map` (certainty-equivalence maps
/// re-solve the design; fixed maps keep it constant). The path errors out
/// with the exit time when the parameter leaves the admissible domain.
#[allow(clippy::too_many_arguments)]
pub fn ode_trajectory(
    theta0: &ModelParams,
    r0: &DMatrix<f64>,
    horizon: f64,
    step: f64,
    r_map: &dyn Fn(&ModelParams) -> Autocorrelation,
    truth: &ModelParams,
    sigma2: f64,
    grid: &FrequencyGrid,
    domains: Option<&TruncationDomains>,
) -> Result<Vec<OdeSample>> {
    let orders = theta0.orders();
    let p = theta0.p_theta();
    if r0.nrows() != p || r0.ncols() != p {
        return Err(Error::Shape("R0 dimension mismatch".into()));
    }
    if step <= 0.0 || horizon <= step {
        return Err(Error::Shape("need 0 < step < horizon".into()));
    }

    let deriv = |th: &DVector<f64>, rm: &DMatrix<f64>, t: f64| -> Result<(DVector<f64>, DMatrix<f64>)> {
        let model = ModelParams::from_vector(orders, th)?;
        if !model.predictor_stable() {
            return Err(Error::OdeExitedDomain(t));
        }
        if let Some(d) = domains {
            if crate::estimator::g_value(&model) > d.schedule.k_at(0) {
                return Err(Error::OdeExitedDomain(t));
            }
        }
        let r = r_map(&model);
        let wg = w_gradient(&model, truth, &r, sigma2, grid)?;
        let g = information_matrix(&model, truth, &r, sigma2, grid)?;
        let chol = nalgebra::Cholesky::new(rm.clone())
            .ok_or_else(|| Error::Numerical(format!("R(t) lost definiteness at t = {t}")))?;
        let dtheta = -chol.solve(&wg);
        let dr = g - rm;
        Ok((dtheta, dr))
    };

    let mut th = theta0.flatten();
    let mut rm = r0.clone();
    let mut out = Vec::new();
    let record = |th: &DVector<f64>, rm: &DMatrix<f64>, t: f64, out: &mut Vec<OdeSample>| -> Result<()> {
        let model = ModelParams::from_vector(orders, th)?;
        let r = r_map(&model);
        let w = w_value(&model, truth, &r, sigma2, grid)?;
        let wg = w_gradient(&model, truth, &r, sigma2, grid)?;
        let eigs = rm.symmetric_eigenvalues();
        out.push(OdeSample {
            t,
            theta: th.clone(),
            r_eig_min: eigs.iter().copied().fold(f64::INFINITY, f64::min),
            r_eig_max: eigs.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            w,
            grad_norm: wg.norm(),
        });
        Ok(())
    };

    let nsteps = (horizon / step).ceil() as usize;
    record(&th, &rm, 0.0, &mut out)?;
    for k in 0..nsteps {
        let t = k as f64 * step;
        let (k1t, k1r) = deriv(&th, &rm, t)?;
        let (k2t, k2r) = deriv(&(&th + &k1t * (step / 2.0)), &(&rm + &k1r * (step / 2.0)), t + step / 2.0)?;
        let (k3t, k3r) = deriv(&(&th + &k2t * (step / 2.0)), &(&rm + &k2r * (step / 2.0)), t + step / 2.0)?;
        let (k4t, k4r) = deriv(&(&th + &k3t * step), &(&rm + &k3r * step), t + step)?;
        th += (k1t + k2t * 2.0 + k3t * 2.0 + k4t) * (step / 6.0);
        rm += (k1r + k2r * 2.0 + k3r * 2.0 + k4r) * (step / 6.0);
        rm = (&rm + rm.transpose()) * 0.5;
        record(&th, &rm, t + step, &mut out)?;
    }
    Ok(out)
}

/// Squared L2 gain of the FIR transfer `B(q)`: `theta_B' theta_B`.
pub fn l2_gain_sq(theta_b: &PolynomialCoeffs) -> Result<f64> {
    if theta_b.kind() != PolyKind::ZeroConstant {
        return Err(Error::Structure("L2 gain identity requires the FIR numerator".into()));
    }
    Ok(theta_b.coeffs().iter().map(|b| b * b).sum())
}

/// Left-hand side of the accuracy constraint:
/// `4 theta_B' (sigma2 / N) R_u^{-1} theta_B`.
pub fn variance_check(
    theta_b_star: &PolynomialCoeffs,
    ru_star: &DMatrix<f64>,
    sigma2: f64,
    n: usize,
) -> Result<f64> {
    let b = DVector::from_vec(theta_b_star.coeffs().to_vec());
    if ru_star.nrows() != b.len() || ru_star.ncols() != b.len() {
        return Err(Error::Shape("R_u dimension mismatch".into()));
    }
    let chol = nalgebra::Cholesky::new(ru_star.clone())
        .ok_or_else(|| Error::SingularInformation("R_u is not positive definite".into()))?;
    let sol = chol.solve(&b);
    Ok(4.0 * sigma2 / n as f64 * b.dot(&sol))
}
