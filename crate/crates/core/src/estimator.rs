//! The Newton-type recursive prediction-error estimator with resetting.
//!
//! Tentative updates
//! `theta' = theta - R^{-1} eps_theta eps / (n+1)` and
//! `R' = R + (eps_theta eps_theta' - R) / (n+1)`
//! are accepted only when the pair stays inside the truncation domains;
//! otherwise the state is reset to its initial point, optionally growing
//! the truncation level.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::regressor::{PhiDims, RegressorState};
use crate::sdp::{self, LmiBlock, SdpProblem, SdpStatus, SolveOptions};

/// Size schedule of the parameter trust region.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TruncationSchedule {
    Fixed(f64),
    /// `K_j = k0 + j`, growing by one per expansion.
    Expanding { k0: f64 },
}

impl TruncationSchedule {
    pub fn k_at(&self, level: u32) -> f64 {
        match self {
            TruncationSchedule::Fixed(k) => *k,
            TruncationSchedule::Expanding { k0 } => k0 + level as f64,
        }
    }
}

/// Convex polytope given by its vertex list. An empty vertex list means the
/// constraint is absent (the order-zero case).
#[derive(Debug, Clone, Default)]
pub struct Polytope {
    pub vertices: Vec<Vec<f64>>,
}

impl Polytope {
    pub fn none() -> Self {
        Self { vertices: Vec::new() }
    }

    pub fn dim(&self) -> usize {
        self.vertices.first().map_or(0, |v| v.len())
    }

    /// Convex-hull membership. Dimension one reduces to an interval test;
    /// higher dimensions solve the small feasibility LP
    /// `min t s.t. |V lambda - x| <= t, |1'lambda - 1| <= t, lambda >= 0`.
    pub fn contains(&self, x: &[f64], tol: f64) -> Result<bool> {
        if self.vertices.is_empty() {
            return Ok(x.is_empty());
        }
        let d = self.dim();
        if x.len() != d {
            return Err(Error::Shape(format!(
                "point dimension {} != polytope dimension {d}",
                x.len()
            )));
        }
        if d == 1 {
            let lo = self.vertices.iter().map(|v| v[0]).fold(f64::INFINITY, f64::min);
            let hi = self.vertices.iter().map(|v| v[0]).fold(f64::NEG_INFINITY, f64::max);
            return Ok(x[0] >= lo - tol && x[0] <= hi + tol);
        }

        let nv = self.vertices.len();
        let n = nv + 1; // lambda_1..lambda_nv, t
        let mut c = DVector::zeros(n);
        c[nv] = 1.0;
        let mut p = SdpProblem::new(n, c);
        let scalar = |f0: f64, terms: Vec<(usize, f64)>| LmiBlock {
            f0: DMatrix::from_element(1, 1, f0),
            terms: terms
                .into_iter()
                .map(|(i, v)| (i, DMatrix::from_element(1, 1, v)))
                .collect(),
        };
        // Row residuals of V lambda = x.
        for (row, &xr) in x.iter().enumerate() {
            let mut plus: Vec<(usize, f64)> = (0..nv)
                .map(|k| (k, self.vertices[k][row]))
                .collect();
            plus.push((nv, 1.0));
            let mut minus: Vec<(usize, f64)> = (0..nv)
                .map(|k| (k, -self.vertices[k][row]))
                .collect();
            minus.push((nv, 1.0));
            p.add_block(scalar(-xr, plus));
            p.add_block(scalar(xr, minus));
        }
        // Affine-combination residual.
        let mut plus: Vec<(usize, f64)> = (0..nv).map(|k| (k, 1.0)).collect();
        plus.push((nv, 1.0));
        let mut minus: Vec<(usize, f64)> = (0..nv).map(|k| (k, -1.0)).collect();
        minus.push((nv, 1.0));
        p.add_block(scalar(-1.0, plus));
        p.add_block(scalar(1.0, minus));
        for k in 0..nv {
            p.set_bounds(k, Some(0.0), Some(1.5));
        }
        let scale = x.iter().fold(1.0f64, |a, v| a.max(v.abs()));
        p.set_bounds(nv, Some(-1.0), Some(10.0 * scale + 10.0));
        let sol = sdp::solve(&p, &SolveOptions::default())?;
        if sol.status != SdpStatus::Optimal {
            return Ok(false);
        }
        Ok(sol.x[nv] <= tol.max(1e-7 * scale))
    }
}

/// Trust domains of the estimator: the parameter region
/// `{g(theta) <= K, theta_C in D_C, theta_F in D_F}` and the matrix band
/// `kappa1 I <= R <= kappa2 I`. The truncation functional is
/// `g(theta) = |theta|^2`.
#[derive(Debug, Clone)]
pub struct TruncationDomains {
    pub schedule: TruncationSchedule,
    pub d_c: Polytope,
    pub d_f: Polytope,
    pub kappa1: f64,
    pub kappa2: f64,
}

impl TruncationDomains {
    /// The case-study configuration: expanding `K_j = 10 + j`, no C/F
    /// polytopes, `kappa1 = 1e-6`, `kappa2 = 1e10`.
    pub fn l2_gain_default() -> Self {
        Self {
            schedule: TruncationSchedule::Expanding { k0: 10.0 },
            d_c: Polytope::none(),
            d_f: Polytope::none(),
            kappa1: 1e-6,
            kappa2: 1e10,
        }
    }

    pub fn validate(&self, orders: &crate::model::ModelOrders) -> Result<()> {
        if !(self.kappa1 > 0.0 && self.kappa1 < self.kappa2) {
            return Err(Error::Shape("need 0 < kappa1 < kappa2".into()));
        }
        if orders.pc > 0 && !self.d_c.vertices.is_empty() && self.d_c.dim() != orders.pc {
            return Err(Error::Shape("D_C vertex dimension != p_c".into()));
        }
        if orders.pf > 0 && !self.d_f.vertices.is_empty() && self.d_f.dim() != orders.pf {
            return Err(Error::Shape("D_F vertex dimension != p_f".into()));
        }
        Ok(())
    }
}

pub fn g_value(theta: &ModelParams) -> f64 {
    theta.flatten().norm_squared()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DomainBreach {
    GExceedsK,
    ThetaCOutside,
    ThetaFOutside,
    RBelowKappa1,
    RAboveKappa2,
}

impl std::fmt::Display for DomainBreach {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            DomainBreach::GExceedsK => write!(f, "g exceeds K"),
            DomainBreach::ThetaCOutside => write!(f, "theta_C outside D_C"),
            DomainBreach::ThetaFOutside => write!(f, "theta_F outside D_F"),
            DomainBreach::RBelowKappa1 => write!(f, "R below kappa1"),
            DomainBreach::RAboveKappa2 => write!(f, "R above kappa2"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DomainCheck {
    pub ok: bool,
    pub reason: Option<DomainBreach>,
}

/// Membership test for the pair `(theta, R)` at truncation level `level`.
pub fn in_domain(
    theta: &ModelParams,
    r: &DMatrix<f64>,
    domains: &TruncationDomains,
    level: u32,
) -> Result<DomainCheck> {
    let fail = |b: DomainBreach| DomainCheck { ok: false, reason: Some(b) };
    if g_value(theta) > domains.schedule.k_at(level) {
        return Ok(fail(DomainBreach::GExceedsK));
    }
    if theta.orders().pc > 0
        && !domains.d_c.vertices.is_empty()
        && !domains.d_c.contains(theta.c().coeffs(), 1e-9)?
    {
        return Ok(fail(DomainBreach::ThetaCOutside));
    }
    if theta.orders().pf > 0
        && !domains.d_f.vertices.is_empty()
        && !domains.d_f.contains(theta.f().coeffs(), 1e-9)?
    {
        return Ok(fail(DomainBreach::ThetaFOutside));
    }
    let eigs = r.symmetric_eigenvalues();
    let min = eigs.iter().copied().fold(f64::INFINITY, f64::min);
    let max = eigs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !min.is_finite() || min < domains.kappa1 {
        return Ok(fail(DomainBreach::RBelowKappa1));
    }
    if !max.is_finite() || max > domains.kappa2 {
        return Ok(fail(DomainBreach::RAboveKappa2));
    }
    Ok(DomainCheck { ok: true, reason: None })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ResetCause {
    Domain(DomainBreach),
    Numerical,
}

#[derive(Debug, Clone, Copy)]
pub struct EstimatorOptions {
    /// Clear the regressor stacks on reset, dropping gradients computed
    /// under the rejected parameters. The resetting rule itself only
    /// restores `(theta, R)`; this knob is a documented deviation.
    pub clear_regressor_on_reset: bool,
    pub sigma2_init: f64,
}

impl Default for EstimatorOptions {
    fn default() -> Self {
        Self { clear_regressor_on_reset: true, sigma2_init: 1.0 }
    }
}

/// Per-step record emitted for tracing.
#[derive(Debug, Clone)]
pub struct StepReport {
    /// Number of data pairs consumed after this step.
    pub n: usize,
    pub eps: f64,
    pub reset: Option<ResetCause>,
    pub r_diag_min: f64,
    pub r_diag_max: f64,
}

#[derive(Debug, Clone)]
pub struct EstimatorState {
    theta: ModelParams,
    r: DMatrix<f64>,
    sigma2_hat: f64,
    n: usize,
    k_level: u32,
    resets: u64,
    last_reset: Option<ResetCause>,
    pending_expansion: bool,
    phi: RegressorState,
    theta0: ModelParams,
    r0: DMatrix<f64>,
    opts: EstimatorOptions,
}

impl EstimatorState {
    pub fn new(theta0: ModelParams, r0: DMatrix<f64>, opts: EstimatorOptions) -> Result<Self> {
        let p = theta0.p_theta();
        if p == 0 {
            return Err(Error::Shape("estimator needs at least one parameter".into()));
        }
        if r0.nrows() != p || r0.ncols() != p {
            return Err(Error::Shape("R0 must be p_theta x p_theta".into()));
        }
        let dims = PhiDims::new(&theta0, 0, 0);
        Ok(Self {
            theta: theta0.clone(),
            r: r0.clone(),
            sigma2_hat: opts.sigma2_init,
            n: 0,
            k_level: 0,
            resets: 0,
            last_reset: None,
            pending_expansion: false,
            phi: RegressorState::new(dims),
            theta0,
            r0,
            opts,
        })
    }

    pub fn theta(&self) -> &ModelParams {
        &self.theta
    }
    pub fn r(&self) -> &DMatrix<f64> {
        &self.r
    }
    pub fn sigma2_hat(&self) -> f64 {
        self.sigma2_hat
    }
    pub fn n(&self) -> usize {
        self.n
    }
    pub fn k_level(&self) -> u32 {
        self.k_level
    }
    pub fn resets(&self) -> u64 {
        self.resets
    }
    pub fn last_reset(&self) -> Option<ResetCause> {
        self.last_reset
    }
    pub fn regressor(&self) -> &RegressorState {
        &self.phi
    }

    /// Consume the data pair `(y, u)`. The first pair only seeds the
    /// regressor stacks; every later call performs the gain-`1/(n+1)`
    /// update, the domain test and, when rejected, the reset.
    pub fn rpem_step(
        &mut self,
        y_next: f64,
        u_next: f64,
        domains: &TruncationDomains,
    ) -> Result<StepReport> {
        let mut reset = None;
        let mut eps = y_next;
        if self.n > 0 {
            let eps_theta = self.phi.eps_theta();
            eps = y_next + self.theta.flatten().dot(&eps_theta);
            if !eps.is_finite() {
                return Err(Error::Numerical("prediction error overflowed".into()));
            }
            let gain = 1.0 / self.n as f64;

            let cand = match nalgebra::Cholesky::new(self.r.clone()) {
                Some(chol) => {
                    let dir = chol.solve(&eps_theta);
                    let theta_cand = self.theta.flatten() - dir * (gain * eps);
                    let mut r_cand = self.r.clone();
                    let outer = &eps_theta * eps_theta.transpose();
                    r_cand += (outer - &self.r) * gain;
                    r_cand = (&r_cand + r_cand.transpose()) * 0.5;
                    Some((theta_cand, r_cand))
                }
                None => None,
            };

            match cand {
                Some((theta_vec, r_cand)) if theta_vec.iter().all(|v| v.is_finite()) => {
                    let theta_cand = ModelParams::from_vector(self.theta.orders(), &theta_vec)?;
                    let check = in_domain(&theta_cand, &r_cand, domains, self.k_level)?;
                    if check.ok {
                        self.theta = theta_cand;
                        self.r = r_cand;
                    } else {
                        reset = Some(ResetCause::Domain(check.reason.unwrap()));
                    }
                }
                _ => {
                    reset = Some(ResetCause::Numerical);
                }
            }

            if let Some(cause) = reset {
                self.resets += 1;
                self.last_reset = Some(cause);
                self.theta = self.theta0.clone();
                self.r = self.r0.clone();
                if matches!(cause, ResetCause::Domain(DomainBreach::GExceedsK)) {
                    self.pending_expansion = true;
                    if matches!(domains.schedule, TruncationSchedule::Expanding { .. }) {
                        self.expand_truncation();
                    }
                }
                if self.opts.clear_regressor_on_reset {
                    self.phi.reset();
                }
            }
            self.sigma2_hat += (eps * eps - self.sigma2_hat) * gain;
        }

        self.phi.step_data(&self.theta, y_next, u_next);
        self.n += 1;
        let diag = self.r.diagonal();
        Ok(StepReport {
            n: self.n,
            eps,
            reset,
            r_diag_min: diag.iter().copied().fold(f64::INFINITY, f64::min),
            r_diag_max: diag.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        })
    }

    /// Grow the truncation level after a reset caused by `g(theta) > K_j`.
    /// Idempotent; does nothing when no such reset is pending.
    pub fn expand_truncation(&mut self) {
        if !self.pending_expansion {
            return;
        }
        self.pending_expansion = false;
        self.k_level += 1;
        self.theta = self.theta0.clone();
        self.r = self.r0.clone();
        self.phi.reset();
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn domains() -> TruncationDomains {
        TruncationDomains::l2_gain_default()
    }

    fn fresh(pb: usize, pd: usize) -> EstimatorState {
        let orders = crate::model::ModelOrders { pa: 0, pb, pf: 0, pc: 0, pd };
        let theta0 = ModelParams::zero(orders);
        let p = orders.p_theta();
        EstimatorState::new(theta0, DMatrix::identity(p, p), EstimatorOptions::default()).unwrap()
    }

    #[test]
    fn in_domain_trivial_cases() {
        let theta = ModelParams::zero(crate::model::ModelOrders { pa: 0, pb: 4, pf: 0, pc: 0, pd: 3 });
        let d = domains();
        let id = DMatrix::identity(7, 7);
        assert!(in_domain(&theta, &id, &d, 0).unwrap().ok);

        let low = DMatrix::from_diagonal_element(7, 7, 1e-7);
        let chk = in_domain(&theta, &low, &d, 0).unwrap();
        assert_eq!(chk.reason, Some(DomainBreach::RBelowKappa1));

        let big = ModelParams::ararx(&[4.0, 0.0, 0.0, 0.0], &[0.0, 0.0, 0.0]);
        // g = 16 > K_0 = 10 with the expanding schedule.
        let chk = in_domain(&big, &id, &d, 0).unwrap();
        assert_eq!(chk.reason, Some(DomainBreach::GExceedsK));
        // After one expansion K_6 = 16 still fails, K_7 passes.
        assert!(in_domain(&big, &id, &d, 7).unwrap().ok);
    }

    #[test]
    fn first_update_matches_hand_arithmetic() {
        // Seed with (y0, u0) = (0, 1); the first update then sees
        // eps_theta = [-1, 0, 0, 0 | 0, 0, 0] and eps = y1.
        let mut st = fresh(4, 3);
        st.rpem_step(0.0, 1.0, &domains()).unwrap();
        let y1 = 0.5;
        let rep = st.rpem_step(y1, 0.0, &domains()).unwrap();
        assert!((rep.eps - y1).abs() < 1e-15);
        // R' = vv' with v = eps_theta is rank one, so the step resets.
        assert!(matches!(rep.reset, Some(ResetCause::Domain(DomainBreach::RBelowKappa1))));
        assert_eq!(st.resets(), 1);
        assert_eq!(st.k_level(), 0, "an R-reset must not expand the truncation");
        // sigma2 tracks the squared error with gain one at the first update.
        assert!((st.sigma2_hat() - y1 * y1).abs() < 1e-15);
    }

    #[test]
    fn single_step_update_arithmetic() {
        // One-parameter model so the first update is observable: with
        // R_0 = I the tentative pair is theta_0 - c v and [v^2].
        let orders = crate::model::ModelOrders { pa: 0, pb: 1, pf: 0, pc: 0, pd: 0 };
        let theta0 = ModelParams::zero(orders);
        let mut st = EstimatorState::new(
            theta0,
            DMatrix::identity(1, 1),
            EstimatorOptions::default(),
        )
        .unwrap();
        let d = domains();
        // Seed with u_0 = 2 so eps_theta = [-2] at the first update.
        st.rpem_step(0.0, 2.0, &d).unwrap();
        let y1 = 0.7;
        let rep = st.rpem_step(y1, 0.0, &d).unwrap();
        // eps_1 = y_1 + theta' eps_theta = 0.7; theta_1 = 0 - eps * (-2) = 1.4.
        assert!(rep.reset.is_none());
        assert!((rep.eps - y1).abs() < 1e-15);
        assert!((st.theta().b().coeffs()[0] - 1.4).abs() < 1e-12);
        // R_1 = v v' = [4].
        assert!((st.r()[(0, 0)] - 4.0).abs() < 1e-12);
    }

    #[test]
    fn zero_gradient_keeps_theta_and_shrinks_r() {
        // Zero data keeps eps_theta = 0: theta fixed, R' = (n/(n+1)) R.
        let mut st = fresh(2, 1);
        st.rpem_step(0.0, 0.0, &domains()).unwrap();
        // n = 1 update with eps_theta = 0 would give R' = 0, rejected.
        let rep = st.rpem_step(0.0, 0.0, &domains()).unwrap();
        assert!(matches!(rep.reset, Some(ResetCause::Domain(DomainBreach::RBelowKappa1))));
        // Feed data so the stacks are nonzero, then check the ratio on a
        // later zero-gradient-free step is immaterial; the arithmetic
        // identity R' - R = (vv' - R)/(n+1) is exercised directly instead.
        let v = DVector::from_vec(vec![1.0, -2.0, 0.5]);
        let r = DMatrix::identity(3, 3) * 0.8;
        let gain: f64 = 1.0 / 5.0;
        let r_next = &r + (&v * v.transpose() - &r) * gain;
        let expect = &r * (1.0 - gain) + (&v * v.transpose()) * gain;
        assert!((&r_next - expect).amax() < 1e-15);
    }

    #[test]
    fn expanding_truncation_schedule() {
        let d = domains();
        assert_eq!(d.schedule.k_at(0), 10.0);
        assert_eq!(d.schedule.k_at(1), 11.0);
        assert_eq!(d.schedule.k_at(3), 13.0);

        let mut st = fresh(4, 3);
        // Manufacture a g-breach reset.
        st.pending_expansion = true;
        st.expand_truncation();
        assert_eq!(st.k_level(), 1);
        // Idempotent without a new pending reset.
        st.expand_truncation();
        assert_eq!(st.k_level(), 1);
    }

    #[test]
    fn polytope_membership() {
        let p = Polytope { vertices: vec![vec![-1.0], vec![1.0]] };
        assert!(p.contains(&[0.3], 1e-9).unwrap());
        assert!(!p.contains(&[1.2], 1e-9).unwrap());

        let square = Polytope {
            vertices: vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 1.0]],
        };
        assert!(square.contains(&[0.5, 0.5], 1e-7).unwrap());
        assert!(square.contains(&[0.0, 1.0], 1e-6).unwrap());
        assert!(!square.contains(&[1.4, 0.5], 1e-7).unwrap());
    }

    #[test]
    fn post_step_state_is_in_domain() {
        use crate::noise::GaussianStream;
        let truth = ModelParams::ararx(&[0.9, 0.6, 0.2, 0.3], &[-1.2, 0.75, -0.2]);
        let plant = crate::statespace::to_state_space(&truth).unwrap();
        let mut es = GaussianStream::from_seed(61, 0.1);
        let mut ss = GaussianStream::from_seed(62, 1.0);
        let mut st = fresh(4, 3);
        let d = domains();
        let mut xi = DVector::zeros(plant.nstates());
        for _ in 0..500 {
            let e = es.next();
            let u = ss.next();
            let y = (plant.c.row(0) * &xi)[0] + e;
            xi = &plant.a * &xi + plant.b.column(0) * u + plant.b.column(1) * e;
            let rep = st.rpem_step(y, u, &d).unwrap();
            if rep.reset.is_none() && st.n() > 1 {
                assert!(in_domain(st.theta(), st.r(), &d, st.k_level()).unwrap().ok);
            }
        }
        // With persistent excitation the estimate moves toward the truth.
        let err = (st.theta().flatten() - truth.flatten()).norm();
        assert!(err < 1.0, "error after 500 steps: {err}");
    }
}
