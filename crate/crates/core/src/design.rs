//! Optimal input design: the autocorrelation parameterization of the input
//! spectrum, the LMI-constrained power-minimization problem, spectral
//! factorization of the optimal spectrum, and its shift-register
//! state-space realization.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::poly::{roots_highest_first, PolynomialCoeffs};
use crate::sdp::{LmiBlock, SdpProblem, SdpSolution, SdpStatus, SolveOptions};
use crate::statespace::StateSpace;

/// Numeric threshold standing in for the exact `|r_tau| > 0` in the
/// effective-order definition.
pub const EFFECTIVE_ORDER_EPS: f64 = 1e-9;

/// Autocorrelation sequence `(r_0, ..., r_m)` of the input; lags beyond `m`
/// are zero and `r_{-j} = r_j`.
#[derive(Debug, Clone, PartialEq)]
pub struct Autocorrelation {
    pub r: Vec<f64>,
}

impl Autocorrelation {
    pub fn new(r: Vec<f64>) -> Self {
        assert!(!r.is_empty(), "autocorrelation needs at least lag zero");
        Self { r }
    }

    /// White sequence of power `r0` padded to `m + 1` lags.
    pub fn white(r0: f64, m: usize) -> Self {
        let mut r = vec![0.0; m + 1];
        r[0] = r0;
        Self { r }
    }

    pub fn m(&self) -> usize {
        self.r.len() - 1
    }

    /// Lag value with symmetric extension and zero beyond `m`.
    pub fn lag(&self, j: i64) -> f64 {
        let a = j.unsigned_abs() as usize;
        if a < self.r.len() {
            self.r[a]
        } else {
            0.0
        }
    }

    /// Largest lag with `|r_tau|` above the effective-order threshold.
    pub fn effective_order(&self) -> usize {
        (1..=self.m())
            .rev()
            .find(|&t| self.r[t].abs() > EFFECTIVE_ORDER_EPS)
            .unwrap_or(0)
    }
}

/// Symmetric Toeplitz matrix of dimension `m + 1` with first row `r`.
pub fn toeplitz(r: &Autocorrelation) -> DMatrix<f64> {
    toeplitz_n(r, r.m() + 1)
}

/// Leading `n x n` Toeplitz matrix of the (zero-extended) sequence.
pub fn toeplitz_n(r: &Autocorrelation, n: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n, n, |i, j| r.lag(i as i64 - j as i64))
}

/// The down-shift matrix and first unit vector of the controllable
/// realization of the FIR half-spectrum.
fn shift_pair(m: usize) -> (DMatrix<f64>, DVector<f64>) {
    let mut a = DMatrix::zeros(m, m);
    for i in 1..m {
        a[(i, i - 1)] = 1.0;
    }
    let mut b = DVector::zeros(m);
    if m > 0 {
        b[0] = 1.0;
    }
    (a, b)
}

/// Positive-real-lemma block for the half-spectrum
/// `r_0/2 + sum_{tau>=1} r_tau z^{-tau}`:
///
/// `[[Q - A'QA, C' - A'QB], [C - B'QA, 2D - B'QB]]`
///
/// with `A` the down-shift, `B = e_1`, `C = (r_1 .. r_m)`, `D = r_0 / 2`.
/// The result is `(m+1) x (m+1)` and affine in `(r, Q)`.
pub fn kyp_block(r: &Autocorrelation, q: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let m = r.m();
    if q.nrows() != m || q.ncols() != m {
        return Err(Error::Shape(format!(
            "Q must be {m} x {m}, got {} x {}",
            q.nrows(),
            q.ncols()
        )));
    }
    let (a, b) = shift_pair(m);
    let mut block = DMatrix::zeros(m + 1, m + 1);
    let qa = q * &a;
    let top = q - a.transpose() * &qa;
    block.view_mut((0, 0), (m, m)).copy_from(&top);
    let aqb = a.transpose() * (q * &b);
    for i in 0..m {
        let v = r.r[i + 1] - aqb[i];
        block[(i, m)] = v;
        block[(m, i)] = v;
    }
    let bqb = if m > 0 { (b.transpose() * q * &b)[(0, 0)] } else { 0.0 };
    block[(m, m)] = r.r[0] - bqb;
    Ok(block)
}

/// The noise-coupling matrix of the ARARX normal equation:
/// `(R_D)_{k,l} = sum_j d_j r_{j + l - k}` for `k, l = 1..p_b`.
pub fn rd_matrix(theta_d: &PolynomialCoeffs, r: &Autocorrelation, p_b: usize) -> DMatrix<f64> {
    let d = theta_d.coeffs();
    DMatrix::from_fn(p_b, p_b, |k, l| {
        d.iter()
            .enumerate()
            .map(|(j, &dj)| dj * r.lag((j as i64 + 1) + l as i64 - k as i64))
            .sum()
    })
}

/// Design-problem constants: target accuracy, experiment length, power
/// bounds and strictness margins.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignConfig {
    pub gamma: f64,
    pub n: usize,
    pub r_min: f64,
    pub r_max: f64,
    pub beta_k: f64,
    pub beta_r: f64,
    pub beta_d: f64,
    pub m: usize,
}

impl DesignConfig {
    /// The constants of the L2-gain case study.
    pub fn l2_gain_default() -> Self {
        Self {
            gamma: 1e-4,
            n: 4000,
            r_min: 1e-3,
            r_max: 5.0,
            beta_k: 1e-3,
            beta_r: 1e-3,
            beta_d: 1e-6,
            m: 3,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.r_min > 0.0 && self.r_min <= self.r_max) {
            return Err(Error::Shape("need 0 < r_min <= r_max".into()));
        }
        if self.gamma <= 0.0 || self.n == 0 {
            return Err(Error::Shape("gamma and N must be positive".into()));
        }
        if self.beta_k <= 0.0 || self.beta_r <= 0.0 || self.beta_d <= 0.0 {
            return Err(Error::Shape("strictness margins must be positive".into()));
        }
        Ok(())
    }
}

/// Index of the symmetric-matrix variable `Q_{ij}` (i <= j) in the packed
/// decision vector `(r_0..r_m, vech Q)`.
fn q_index(m: usize, i: usize, j: usize) -> usize {
    debug_assert!(i <= j && j < m);
    m + 1 + j * (j + 1) / 2 + i
}

fn num_design_vars(m: usize) -> usize {
    m + 1 + m * (m + 1) / 2
}

/// Symmetric basis matrix for the `(i, j)` entry.
fn sym_unit(m: usize, i: usize, j: usize) -> DMatrix<f64> {
    let mut e = DMatrix::zeros(m, m);
    e[(i, j)] = 1.0;
    e[(j, i)] = 1.0;
    if i == j {
        e[(i, i)] = 1.0;
    }
    e
}

/// Toeplitz coefficient pattern of lag `k` at dimension `n`.
fn toeplitz_pattern(n: usize, k: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n, n, |i, j| if i.abs_diff(j) == k { 1.0 } else { 0.0 })
}

/// Assemble the power-minimization program solved at each iteration:
/// minimize `r_0` over `(r, Q)` subject to
///   (i)   `[[R_u(r), 2 theta_B], [2 theta_B', gamma N / sigma2]] >= 0`
///   (ii)  `KYP(r, Q) >= beta_K I`
///   (iii) `Q >= 0`
///   (iv)  `R_u(r) >= beta_R I`
///   (v)   `r_min <= r_0 <= r_max`
///   (vi)  `R_u(r) + (R_D + R_D')/2 >= beta_D I`.
///
/// Requires the ARARX structure (`p_a = p_f = p_c = 0`) and `m = p_b - 1`,
/// which makes every block `p_b x p_b` apart from the bordered accuracy
/// block.
pub fn build_design_problem(
    theta: &ModelParams,
    sigma2_hat: f64,
    cfg: &DesignConfig,
) -> Result<SdpProblem> {
    cfg.validate()?;
    let o = theta.orders();
    if o.pa != 0 || o.pf != 0 || o.pc != 0 {
        return Err(Error::Structure(
            "design problem requires the ARARX structure (p_a = p_f = p_c = 0)".into(),
        ));
    }
    if cfg.m + 1 != o.pb {
        return Err(Error::Structure(format!(
            "generator order m = {} must equal p_b - 1 = {}",
            cfg.m,
            o.pb - 1
        )));
    }
    if sigma2_hat <= 0.0 {
        return Err(Error::Shape("sigma2_hat must be positive".into()));
    }

    let m = cfg.m;
    let pb = o.pb;
    let nv = num_design_vars(m);
    let mut c = DVector::zeros(nv);
    c[0] = 1.0;
    let mut p = SdpProblem::new(nv, c);

    // (i) accuracy block, bordered Toeplitz.
    {
        let dim = pb + 1;
        let mut f0 = DMatrix::zeros(dim, dim);
        let tb = theta.b().coeffs();
        for (i, &b) in tb.iter().enumerate() {
            f0[(i, pb)] = 2.0 * b;
            f0[(pb, i)] = 2.0 * b;
        }
        f0[(pb, pb)] = cfg.gamma * cfg.n as f64 / sigma2_hat;
        let mut terms = Vec::new();
        for k in 0..=m {
            let mut fi = DMatrix::zeros(dim, dim);
            fi.view_mut((0, 0), (pb, pb)).copy_from(&toeplitz_pattern(pb, k));
            terms.push((k, fi));
        }
        p.add_block(LmiBlock { f0, terms });
    }

    // (ii) KYP block minus the strictness margin. Affine in (r, Q):
    // assemble coefficient matrices per variable from the block builder.
    {
        let dim = m + 1;
        let f0 = DMatrix::from_diagonal_element(dim, dim, -cfg.beta_k);
        let mut terms = Vec::new();
        let zero_q = DMatrix::zeros(m, m);
        for k in 0..=m {
            let mut r = Autocorrelation::white(0.0, m);
            r.r[k] = 1.0;
            terms.push((k, kyp_block(&r, &zero_q)?));
        }
        let rzero = Autocorrelation::white(0.0, m);
        for j in 0..m {
            for i in 0..=j {
                let e = sym_unit(m, i, j);
                terms.push((q_index(m, i, j), kyp_block(&rzero, &e)?));
            }
        }
        p.add_block(LmiBlock { f0, terms });
    }

    // (iii) Q >= 0.
    if m > 0 {
        let f0 = DMatrix::zeros(m, m);
        let mut terms = Vec::new();
        for j in 0..m {
            for i in 0..=j {
                terms.push((q_index(m, i, j), sym_unit(m, i, j)));
            }
        }
        p.add_block(LmiBlock { f0, terms });
    }

    // (iv) persistent-excitation floor.
    {
        let f0 = DMatrix::from_diagonal_element(pb, pb, -cfg.beta_r);
        let terms = (0..=m).map(|k| (k, toeplitz_pattern(pb, k))).collect();
        p.add_block(LmiBlock { f0, terms });
    }

    // (vi) uniqueness of the normal-equation solution.
    {
        let f0 = DMatrix::from_diagonal_element(pb, pb, -cfg.beta_d);
        let d = theta.d().coeffs();
        let mut terms = Vec::new();
        for k in 0..=m {
            let mut coeff = toeplitz_pattern(pb, k);
            // Symmetrized R_D contribution: each (row, col) visit adds half
            // of its lag coefficient to both mirror entries.
            for row in 0..pb {
                for col in 0..pb {
                    for (j, &dj) in d.iter().enumerate() {
                        let lagidx = (j as i64 + 1) + col as i64 - row as i64;
                        if lagidx.unsigned_abs() as usize == k {
                            coeff[(row, col)] += 0.5 * dj;
                            coeff[(col, row)] += 0.5 * dj;
                        }
                    }
                }
            }
            terms.push((k, coeff));
        }
        p.add_block(LmiBlock { f0, terms });
    }

    // (v) power box.
    p.set_bounds(0, Some(cfg.r_min), Some(cfg.r_max));

    // Candidate interior point: a mildly colored spectrum with staircase Q.
    p.init = Some(candidate_start(theta, sigma2_hat, cfg));
    Ok(p)
}

/// Deterministic candidate interior point for the design program: white
/// spectrum at a power level clearing the accuracy and KYP margins.
fn candidate_start(theta: &ModelParams, sigma2_hat: f64, cfg: &DesignConfig) -> DVector<f64> {
    let m = cfg.m;
    let tb = theta.b().coeffs();
    let nb2: f64 = tb.iter().map(|b| b * b).sum();
    let acc_floor = 4.0 * nb2 * sigma2_hat / (cfg.gamma * cfg.n as f64);
    let delta = 2.0 * cfg.beta_k;
    let floor = [
        acc_floor * 1.5 + 10.0 * cfg.beta_r,
        m as f64 * delta + 2.0 * cfg.beta_k,
        2.0 * cfg.beta_r,
        2.0 * cfg.r_min,
    ]
    .into_iter()
    .fold(0.0f64, f64::max);
    // Clamp into the power box; if the floor does not fit, the candidate is
    // simply rejected by the strict-feasibility check and phase I runs.
    let r0 = floor.max(1.001 * cfg.r_min).min(0.999 * cfg.r_max);
    let mut x = DVector::zeros(num_design_vars(m));
    x[0] = r0;
    for i in 0..m {
        x[q_index(m, i, i)] = (m - i) as f64 * delta;
    }
    x
}

#[derive(Debug, Clone)]
pub struct DesignOutcome {
    pub r: Autocorrelation,
    pub fallback: bool,
    pub solution: Option<SdpSolution>,
}

/// Builder hook for design programs over the decision vector
/// `(r_0..r_m, vech Q)`: alternative costs and constraint sets plug in by
/// assembling their own program. Only the L2-gain power-minimization
/// instance ships.
pub trait DesignProgram {
    fn build(
        &self,
        theta: &ModelParams,
        sigma2_hat: f64,
        cfg: &DesignConfig,
    ) -> Result<SdpProblem>;
}

/// Minimize input power subject to the L2-gain accuracy target.
#[derive(Debug, Clone, Copy, Default)]
pub struct L2GainPowerDesign;

impl DesignProgram for L2GainPowerDesign {
    fn build(
        &self,
        theta: &ModelParams,
        sigma2_hat: f64,
        cfg: &DesignConfig,
    ) -> Result<SdpProblem> {
        build_design_problem(theta, sigma2_hat, cfg)
    }
}

/// Solve the design program at `theta`, falling back to the full-power
/// white spectrum when the program has no solution.
pub fn solve_design(
    theta: &ModelParams,
    sigma2_hat: f64,
    cfg: &DesignConfig,
    opts: &SolveOptions,
) -> Result<DesignOutcome> {
    solve_design_with(&L2GainPowerDesign, theta, sigma2_hat, cfg, opts)
}

pub fn solve_design_with(
    program: &dyn DesignProgram,
    theta: &ModelParams,
    sigma2_hat: f64,
    cfg: &DesignConfig,
    opts: &SolveOptions,
) -> Result<DesignOutcome> {
    let problem = program.build(theta, sigma2_hat, cfg)?;
    let sol = crate::sdp::solve(&problem, opts)?;
    if sol.status == SdpStatus::Optimal {
        let r = Autocorrelation::new(sol.x.rows(0, cfg.m + 1).iter().copied().collect());
        Ok(DesignOutcome { r, fallback: false, solution: Some(sol) })
    } else {
        Ok(DesignOutcome {
            r: Autocorrelation::white(cfg.r_max, cfg.m),
            fallback: true,
            solution: None,
        })
    }
}

/// Minimum-phase spectral factor of the spectrum.
#[derive(Debug, Clone)]
pub struct InputFilter {
    /// Filter taps `(f_0, ..., f_m)`; entries beyond the effective order
    /// are zero.
    pub f: Vec<f64>,
    pub m_tau: usize,
    /// Set when a factor root sits on the unit circle within tolerance.
    pub boundary: bool,
}

impl InputFilter {
    /// Maximum modulus over the factor's roots (zero for white filters).
    pub fn max_root_modulus(&self) -> f64 {
        let coeffs: Vec<f64> = self.f[..=self.m_tau].to_vec();
        roots_highest_first(&coeffs)
            .iter()
            .map(|r| r.norm())
            .fold(0.0, f64::max)
    }

    /// Autocorrelation generated by the filter: `sum_k f_k f_{k+tau}`.
    pub fn autocorrelation(&self, m: usize) -> Autocorrelation {
        let mut r = vec![0.0; m + 1];
        for (tau, rt) in r.iter_mut().enumerate() {
            let mut acc = 0.0;
            for k in 0..self.f.len().saturating_sub(tau) {
                acc += self.f[k] * self.f[k + tau];
            }
            *rt = acc;
        }
        Autocorrelation::new(r)
    }
}

/// Spectrum value `r_0 + 2 sum r_tau cos(omega tau)`.
pub fn spectrum_eval(r: &Autocorrelation, omega: f64) -> f64 {
    let mut v = r.r[0];
    for (tau, &rt) in r.r.iter().enumerate().skip(1) {
        v += 2.0 * rt * (omega * tau as f64).cos();
    }
    v
}

/// Spectral factorization of a nonnegative spectrum into its minimum-phase
/// factor. Roots of the symmetric Laurent polynomial are computed through
/// the companion matrix; the factor keeps the half inside the unit disc
/// (boundary multiplicities split evenly by the modulus ordering), is
/// scaled to match `r_0` and polished by a few Newton corrections on the
/// convolution identity.
pub fn spectral_factorize(r: &Autocorrelation, tol: f64) -> Result<InputFilter> {
    let m = r.m();
    // Spectrum nonnegativity check on a dense grid.
    let grid = 512;
    let mut min_psi = f64::INFINITY;
    for k in 0..grid {
        let w = std::f64::consts::PI * (2.0 * k as f64 / grid as f64 - 1.0);
        min_psi = min_psi.min(spectrum_eval(r, w));
    }
    let scale = r.r[0].abs().max(1.0);
    if min_psi < -tol.max(1e-12) * scale {
        return Err(Error::NotPsdSpectrum(format!(
            "grid minimum {min_psi:.3e} below -{:.3e}",
            tol * scale
        )));
    }

    let m_tau = r.effective_order();
    if m_tau == 0 {
        let mut f = vec![0.0; m + 1];
        f[0] = r.r[0].max(0.0).sqrt();
        return Ok(InputFilter { f, m_tau: 0, boundary: false });
    }

    // z^{m_tau} Psi(z): palindromic coefficients, highest power first.
    let mut coeffs = Vec::with_capacity(2 * m_tau + 1);
    for tau in (1..=m_tau).rev() {
        coeffs.push(r.r[tau]);
    }
    coeffs.push(r.r[0]);
    for tau in 1..=m_tau {
        coeffs.push(r.r[tau]);
    }
    let mut roots = roots_highest_first(&coeffs);
    roots.sort_by(|a, b| a.norm().partial_cmp(&b.norm()).unwrap());
    let inside: Vec<Complex64> = roots[..m_tau].to_vec();
    let boundary = inside.iter().any(|z| z.norm() > 1.0 - 1e-8);

    // Expand the monic polynomial with the selected roots.
    let mut poly = vec![Complex64::new(1.0, 0.0)];
    for z in &inside {
        let mut next = vec![Complex64::new(0.0, 0.0); poly.len() + 1];
        for (i, &p) in poly.iter().enumerate() {
            next[i] += p;
            next[i + 1] -= p * z;
        }
        poly = next;
    }
    let mut f: Vec<f64> = poly.iter().map(|c| c.re).collect();

    // Scale so the zero-lag convolution matches r_0 and normalize the sign.
    let rho0: f64 = f.iter().map(|v| v * v).sum();
    if rho0 <= 0.0 {
        return Err(Error::Numerical("degenerate factor".into()));
    }
    let s = (r.r[0] / rho0).sqrt();
    for v in f.iter_mut() {
        *v *= s;
    }
    if f[0] < 0.0 {
        for v in f.iter_mut() {
            *v = -*v;
        }
    }

    newton_polish(&mut f, r, m_tau);

    let mut full = vec![0.0; m + 1];
    full[..=m_tau].copy_from_slice(&f);
    Ok(InputFilter { f: full, m_tau, boundary })
}

/// Newton refinement of the convolution identity `conv(f)_tau = r_tau`.
fn newton_polish(f: &mut [f64], r: &Autocorrelation, m_tau: usize) {
    let n = m_tau + 1;
    for _ in 0..3 {
        let mut resid = DVector::zeros(n);
        for tau in 0..n {
            let mut acc = 0.0;
            for k in 0..n - tau {
                acc += f[k] * f[k + tau];
            }
            resid[tau] = acc - r.r[tau];
        }
        if resid.amax() < 1e-15 * (1.0 + r.r[0].abs()) {
            return;
        }
        let mut jac = DMatrix::zeros(n, n);
        for tau in 0..n {
            for k in 0..n {
                let mut v = 0.0;
                if k + tau < n {
                    v += f[k + tau];
                }
                if k >= tau {
                    v += f[k - tau];
                }
                jac[(tau, k)] = v;
            }
        }
        let Some(qr) = jac.lu().solve(&resid) else { return };
        for k in 0..n {
            f[k] -= qr[k];
        }
    }
}

/// Shift-register realization of the factor: empty dynamics for a white
/// filter, otherwise the nilpotent down-shift driven by the source with
/// taps on the output row.
pub fn realize_filter(filter: &InputFilter, m: usize) -> Result<StateSpace> {
    if m < filter.m_tau {
        return Err(Error::Order(format!(
            "realization order {m} below effective order {}",
            filter.m_tau
        )));
    }
    let m_tau = filter.m_tau;
    let d = DMatrix::from_element(1, 1, filter.f[0]);
    if m_tau == 0 {
        return StateSpace::new(
            DMatrix::zeros(m, m),
            DMatrix::zeros(m, 1),
            DMatrix::zeros(1, m),
            d,
        );
    }
    let mut a = DMatrix::zeros(m, m);
    for i in 1..m_tau {
        a[(i, i - 1)] = 1.0;
    }
    let mut b = DMatrix::zeros(m, 1);
    b[(0, 0)] = 1.0;
    let mut c = DMatrix::zeros(1, m);
    for i in 0..m_tau {
        c[(0, i)] = filter.f[i + 1];
    }
    StateSpace::new(a, b, c, d)
}
