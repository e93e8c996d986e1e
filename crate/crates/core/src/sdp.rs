//! Small dense semidefinite programs: linear objective, affine
//! symmetric-matrix-inequality blocks and optional per-variable bounds.
//!
//! The solver is a primal log-det barrier path-following method with
//! damped Newton steps and a slack-minimizing phase I. Problems here are
//! tiny (tens of variables, blocks up to ~10x10), so a dependency-free
//! interior-point method is adequate and easy to audit. Everything is
//! deterministic given identical inputs.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// One affine constraint block `F0 + sum_i x_i F_i >= 0`.
#[derive(Debug, Clone)]
pub struct LmiBlock {
    pub f0: DMatrix<f64>,
    /// Sparse-by-variable list of symmetric coefficient matrices.
    pub terms: Vec<(usize, DMatrix<f64>)>,
}

impl LmiBlock {
    pub fn dim(&self) -> usize {
        self.f0.nrows()
    }

    pub fn eval(&self, x: &DVector<f64>) -> DMatrix<f64> {
        let mut s = self.f0.clone();
        for (i, fi) in &self.terms {
            s += fi * x[*i];
        }
        s
    }

    fn validate(&self, num_vars: usize) -> Result<()> {
        let d = self.dim();
        let sym_ok = |m: &DMatrix<f64>| {
            m.nrows() == d
                && m.ncols() == d
                && (0..d).all(|i| (i..d).all(|j| (m[(i, j)] - m[(j, i)]).abs() <= 1e-12 * (1.0 + m[(i, j)].abs())))
        };
        if !sym_ok(&self.f0) {
            return Err(Error::Shape("block F0 not symmetric".into()));
        }
        for (i, fi) in &self.terms {
            if *i >= num_vars {
                return Err(Error::Shape(format!("term references variable {i} out of range")));
            }
            if !sym_ok(fi) {
                return Err(Error::Shape(format!("coefficient of variable {i} not symmetric")));
            }
        }
        Ok(())
    }
}

/// `min c'x  s.t.  F0_j + sum_i x_i F_i_j >= 0,  l <= x <= u`.
#[derive(Debug, Clone)]
pub struct SdpProblem {
    pub num_vars: usize,
    pub objective: DVector<f64>,
    pub blocks: Vec<LmiBlock>,
    pub lower: Vec<Option<f64>>,
    pub upper: Vec<Option<f64>>,
    /// Optional candidate interior point; used instead of phase I when it
    /// is strictly feasible.
    pub init: Option<DVector<f64>>,
}

impl SdpProblem {
    pub fn new(num_vars: usize, objective: DVector<f64>) -> Self {
        Self {
            num_vars,
            objective,
            blocks: Vec::new(),
            lower: vec![None; num_vars],
            upper: vec![None; num_vars],
            init: None,
        }
    }

    pub fn add_block(&mut self, block: LmiBlock) {
        self.blocks.push(block);
    }

    pub fn set_bounds(&mut self, var: usize, lower: Option<f64>, upper: Option<f64>) {
        self.lower[var] = lower;
        self.upper[var] = upper;
    }

    fn validate(&self) -> Result<()> {
        if self.objective.len() != self.num_vars {
            return Err(Error::Shape("objective length != num_vars".into()));
        }
        if self.lower.len() != self.num_vars || self.upper.len() != self.num_vars {
            return Err(Error::Shape("bound vectors length != num_vars".into()));
        }
        for b in &self.blocks {
            b.validate(self.num_vars)?;
        }
        for i in 0..self.num_vars {
            if let (Some(l), Some(u)) = (self.lower[i], self.upper[i]) {
                if l >= u {
                    return Err(Error::Shape(format!("empty box for variable {i}")));
                }
            }
        }
        Ok(())
    }

    /// Plain-text dump (dimensions, then dense matrices row-major) for
    /// external cross-checking.
    pub fn dump(&self) -> String {
        use std::fmt::Write as _;
        let mut s = String::new();
        writeln!(s, "vars {}", self.num_vars).unwrap();
        write!(s, "objective").unwrap();
        for v in self.objective.iter() {
            write!(s, " {v:.17e}").unwrap();
        }
        writeln!(s).unwrap();
        for (i, (l, u)) in self.lower.iter().zip(self.upper.iter()).enumerate() {
            if l.is_some() || u.is_some() {
                writeln!(
                    s,
                    "box {} {} {}",
                    i,
                    l.map_or("-inf".into(), |v| format!("{v:.17e}")),
                    u.map_or("+inf".into(), |v| format!("{v:.17e}"))
                )
                .unwrap();
            }
        }
        for (bi, b) in self.blocks.iter().enumerate() {
            writeln!(s, "block {} dim {} terms {}", bi, b.dim(), b.terms.len()).unwrap();
            let dump_mat = |s: &mut String, m: &DMatrix<f64>| {
                for r in 0..m.nrows() {
                    for c in 0..m.ncols() {
                        write!(s, " {:.17e}", m[(r, c)]).unwrap();
                    }
                }
                writeln!(s).unwrap();
            };
            write!(s, "F0").unwrap();
            dump_mat(&mut s, &b.f0);
            for (i, fi) in &b.terms {
                write!(s, "F{i}").unwrap();
                dump_mat(&mut s, fi);
            }
        }
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SdpStatus {
    Optimal,
    Infeasible,
    MaxIter,
}

#[derive(Debug, Clone)]
pub struct SdpSolution {
    pub x: DVector<f64>,
    pub objective_value: f64,
    pub status: SdpStatus,
    pub max_constraint_violation: f64,
    pub newton_steps: usize,
}

#[derive(Debug, Clone, Copy)]
pub struct SolveOptions {
    /// Relative feasibility tolerance for the reported solution.
    pub tol_feas: f64,
    /// Relative duality-gap tolerance.
    pub tol_gap: f64,
    /// Total Newton-step cap across both phases.
    pub max_newton: usize,
    /// Barrier parameter growth factor.
    pub mu: f64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self { tol_feas: 1e-7, tol_gap: 1e-6, max_newton: 200, mu: 20.0 }
    }
}

/// Feasibility/optimality report computed independently of the solve path
/// (eigenvalue decompositions instead of Cholesky factors).
#[derive(Debug, Clone)]
pub struct CheckReport {
    pub block_min_eigs: Vec<f64>,
    pub box_violation: f64,
    pub objective_value: f64,
    pub max_violation: f64,
}

pub fn check_solution(problem: &SdpProblem, x: &DVector<f64>, _tol: f64) -> CheckReport {
    let mut mins = Vec::with_capacity(problem.blocks.len());
    for b in &problem.blocks {
        let s = b.eval(x);
        let min = if s.nrows() == 0 {
            0.0
        } else {
            s.symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min)
        };
        mins.push(min);
    }
    let mut box_violation = 0.0f64;
    for i in 0..problem.num_vars {
        if let Some(l) = problem.lower[i] {
            box_violation = box_violation.max(l - x[i]);
        }
        if let Some(u) = problem.upper[i] {
            box_violation = box_violation.max(x[i] - u);
        }
    }
    let eig_violation = mins.iter().fold(0.0f64, |acc, &m| acc.max(-m));
    CheckReport {
        block_min_eigs: mins,
        box_violation,
        objective_value: problem.objective.dot(x),
        max_violation: eig_violation.max(box_violation),
    }
}

struct Barrier<'a> {
    p: &'a SdpProblem,
    /// Barrier degree: sum of block dims plus number of finite bounds.
    nu: f64,
}

struct Factored {
    /// Inverse of each block value at the current point.
    inv: Vec<DMatrix<f64>>,
    /// -sum log det of the blocks - box logs.
    phi: f64,
}

impl<'a> Barrier<'a> {
    fn new(p: &'a SdpProblem) -> Self {
        let mut nu = 0.0;
        for b in &p.blocks {
            nu += b.dim() as f64;
        }
        for i in 0..p.num_vars {
            if p.lower[i].is_some() {
                nu += 1.0;
            }
            if p.upper[i].is_some() {
                nu += 1.0;
            }
        }
        Self { p, nu: nu.max(1.0) }
    }

    /// Factor all blocks at x; `None` when x is not strictly feasible.
    fn factor(&self, x: &DVector<f64>) -> Option<Factored> {
        let mut inv = Vec::with_capacity(self.p.blocks.len());
        let mut phi = 0.0;
        for b in &self.p.blocks {
            let s = b.eval(x);
            if s.nrows() == 0 {
                inv.push(s);
                continue;
            }
            let chol = nalgebra::Cholesky::new(s)?;
            let logdet: f64 = chol.l().diagonal().iter().map(|d| d.ln()).sum::<f64>() * 2.0;
            phi -= logdet;
            inv.push(chol.inverse());
        }
        for i in 0..self.p.num_vars {
            if let Some(l) = self.p.lower[i] {
                let t = x[i] - l;
                if t <= 0.0 {
                    return None;
                }
                phi -= t.ln();
            }
            if let Some(u) = self.p.upper[i] {
                let t = u - x[i];
                if t <= 0.0 {
                    return None;
                }
                phi -= t.ln();
            }
        }
        Some(Factored { inv, phi })
    }

    /// Gradient and Hessian of the barrier at x given the block inverses.
    fn derivatives(&self, x: &DVector<f64>, f: &Factored) -> (DVector<f64>, DMatrix<f64>) {
        let n = self.p.num_vars;
        let mut g = DVector::zeros(n);
        let mut h = DMatrix::zeros(n, n);
        for (b, sinv) in self.p.blocks.iter().zip(f.inv.iter()) {
            if b.dim() == 0 {
                continue;
            }
            let ws: Vec<(usize, DMatrix<f64>)> =
                b.terms.iter().map(|(i, fi)| (*i, sinv * fi)).collect();
            for (i, wi) in &ws {
                g[*i] -= wi.trace();
            }
            for (a, (i, wi)) in ws.iter().enumerate() {
                for (j, wj) in ws.iter().skip(a) {
                    // tr(Wi Wj)
                    let mut t = 0.0;
                    for r in 0..wi.nrows() {
                        for c in 0..wi.ncols() {
                            t += wi[(r, c)] * wj[(c, r)];
                        }
                    }
                    h[(*i, *j)] += t;
                    if i != j {
                        h[(*j, *i)] += t;
                    }
                }
            }
        }
        for i in 0..n {
            if let Some(l) = self.p.lower[i] {
                let t = x[i] - l;
                g[i] -= 1.0 / t;
                h[(i, i)] += 1.0 / (t * t);
            }
            if let Some(u) = self.p.upper[i] {
                let t = u - x[i];
                g[i] += 1.0 / t;
                h[(i, i)] += 1.0 / (t * t);
            }
        }
        (g, h)
    }
}

struct PathResult {
    x: DVector<f64>,
    newton_steps: usize,
    converged: bool,
}

/// Follow the central path `min t c'x + phi(x)` from a strictly feasible x0.
/// `stop_early` may terminate the run as soon as the iterate satisfies a
/// caller condition (used by phase I). The duality-gap test `nu/t <= tol`
/// is only trusted at successfully centered iterates.
fn follow_path(
    barrier: &Barrier,
    c: &DVector<f64>,
    mut x: DVector<f64>,
    opts: &SolveOptions,
    budget: &mut usize,
    stop_early: &dyn Fn(&DVector<f64>) -> bool,
) -> Result<PathResult> {
    let mut t = 1.0;
    let mut steps = 0usize;
    let finish = |x, steps: usize, converged, budget: &mut usize| {
        *budget -= steps.min(*budget);
        Ok(PathResult { x, newton_steps: steps, converged })
    };
    loop {
        // Newton centering for the current t.
        let mut last_val: Option<f64> = None;
        let centered = loop {
            if steps >= *budget {
                return finish(x, steps, false, budget);
            }
            let f = barrier
                .factor(&x)
                .ok_or_else(|| Error::Numerical("iterate left the interior".into()))?;
            if stop_early(&x) {
                return finish(x, steps, true, budget);
            }
            let (g, h) = barrier.derivatives(&x, &f);
            let grad = c * t + &g;
            // Factor the Hessian, adding a small ridge if needed.
            let mut ridge = 0.0;
            let chol = loop {
                let mut hr = h.clone();
                if ridge > 0.0 {
                    for i in 0..hr.nrows() {
                        hr[(i, i)] += ridge;
                    }
                }
                match nalgebra::Cholesky::new(hr) {
                    Some(c) => break c,
                    None => {
                        ridge = if ridge == 0.0 { 1e-12 * (1.0 + h.trace().abs()) } else { ridge * 100.0 };
                        if ridge > 1e6 * (1.0 + h.trace().abs()) {
                            return Err(Error::Numerical("barrier Hessian is singular".into()));
                        }
                    }
                }
            };
            let dir = chol.solve(&(-&grad));
            let decrement = -grad.dot(&dir);
            if decrement * 0.5 <= 1e-10 {
                break true;
            }
            // Backtracking line search staying strictly feasible.
            let base = t * c.dot(&x) + f.phi;
            let mut alpha = 1.0;
            let mut moved = None;
            for _ in 0..60 {
                let cand = &x + &dir * alpha;
                if let Some(fc) = barrier.factor(&cand) {
                    let val = t * c.dot(&cand) + fc.phi;
                    if val <= base - 0.25 * alpha * decrement {
                        x = cand;
                        moved = Some(val);
                        break;
                    }
                }
                alpha *= 0.5;
            }
            steps += 1;
            match moved {
                None => {
                    // Line-search stall: no further progress at this t.
                    break false;
                }
                Some(val) => {
                    // Scale-aware stagnation: the centering value no longer
                    // improves beyond rounding, treat the point as central.
                    if let Some(prev) = last_val {
                        if prev - val <= 1e-12 * (1.0 + val.abs()) {
                            break true;
                        }
                    }
                    last_val = Some(val);
                }
            }
        };
        if centered {
            let obj = c.dot(&x);
            if barrier.nu / t <= opts.tol_gap * obj.abs().max(1.0) {
                return finish(x, steps, true, budget);
            }
        } else if t * opts.mu > 1e16 * barrier.nu {
            // Stalled and the barrier parameter is already huge: give up.
            return finish(x, steps, false, budget);
        }
        t *= opts.mu;
    }
}

/// A strictly interior default starting point for phase I: box midpoints.
fn default_start(p: &SdpProblem) -> DVector<f64> {
    let mut x = DVector::zeros(p.num_vars);
    for i in 0..p.num_vars {
        x[i] = match (p.lower[i], p.upper[i]) {
            (Some(l), Some(u)) => 0.5 * (l + u),
            (Some(l), None) => l + 1.0,
            (None, Some(u)) => u - 1.0,
            (None, None) => 0.0,
        };
    }
    x
}

/// True when every block at x is positive definite (Cholesky succeeds)
/// and the box holds strictly.
fn strictly_feasible(p: &SdpProblem, x: &DVector<f64>) -> bool {
    for i in 0..p.num_vars {
        if let Some(l) = p.lower[i] {
            if x[i] <= l {
                return false;
            }
        }
        if let Some(u) = p.upper[i] {
            if x[i] >= u {
                return false;
            }
        }
    }
    for b in &p.blocks {
        if b.dim() == 0 {
            continue;
        }
        if nalgebra::Cholesky::new(b.eval(x)).is_none() {
            return false;
        }
    }
    true
}

pub fn solve(problem: &SdpProblem, opts: &SolveOptions) -> Result<SdpSolution> {
    problem.validate()?;
    let mut budget = opts.max_newton;
    let mut total_steps = 0usize;

    // Starting point: supplied candidate, box midpoint, or phase I.
    let mut start = None;
    if let Some(init) = &problem.init {
        if init.len() == problem.num_vars && strictly_feasible(problem, init) {
            start = Some(init.clone());
        }
    }
    if start.is_none() {
        let x0 = default_start(problem);
        if strictly_feasible(problem, &x0) {
            start = Some(x0);
        }
    }
    let start = match start {
        Some(s) => s,
        None => {
            let before = budget;
            let outcome = phase_one(problem, opts, &mut budget)?;
            total_steps += before - budget;
            match outcome {
                PhaseOneOutcome::Feasible(x) => x,
                PhaseOneOutcome::Infeasible | PhaseOneOutcome::Budget => {
                    let status = if matches!(outcome, PhaseOneOutcome::Budget) {
                        SdpStatus::MaxIter
                    } else {
                        SdpStatus::Infeasible
                    };
                    return Ok(SdpSolution {
                        x: DVector::zeros(problem.num_vars),
                        objective_value: f64::NAN,
                        status,
                        max_constraint_violation: f64::NAN,
                        newton_steps: total_steps,
                    });
                }
            }
        }
    };

    let barrier = Barrier::new(problem);
    let res = follow_path(&barrier, &problem.objective, start, opts, &mut budget, &|_| false)?;
    total_steps += res.newton_steps;
    let report = check_solution(problem, &res.x, opts.tol_feas);
    let status = if res.converged { SdpStatus::Optimal } else { SdpStatus::MaxIter };
    Ok(SdpSolution {
        x: res.x,
        objective_value: report.objective_value,
        status,
        max_constraint_violation: report.max_violation,
        newton_steps: total_steps,
    })
}

enum PhaseOneOutcome {
    Feasible(DVector<f64>),
    Infeasible,
    Budget,
}

/// Slack-minimizing phase I: `min s  s.t.  F_j(x) + s I >= 0`, with a wide
/// synthetic box on unconstrained variables to keep the iterates from
/// drifting, stopping as soon as the x-part is strictly feasible for the
/// original problem.
fn phase_one(p: &SdpProblem, opts: &SolveOptions, budget: &mut usize) -> Result<PhaseOneOutcome> {
    let n = p.num_vars;
    let x0 = default_start(p);
    // Initial slack: enough to dominate the most negative block eigenvalue.
    let mut s0 = 0.0f64;
    for b in &p.blocks {
        if b.dim() == 0 {
            continue;
        }
        let ev = b.eval(&x0).symmetric_eigenvalues();
        let min = ev.iter().copied().fold(f64::INFINITY, f64::min);
        s0 = s0.max(-min);
    }
    s0 += 1.0;

    let mut aux = SdpProblem::new(n + 1, {
        let mut c = DVector::zeros(n + 1);
        c[n] = 1.0;
        c
    });
    for b in &p.blocks {
        let mut terms = b.terms.clone();
        terms.push((n, DMatrix::identity(b.dim(), b.dim())));
        aux.add_block(LmiBlock { f0: b.f0.clone(), terms });
    }
    const SYNTH: f64 = 1e6;
    for i in 0..n {
        let lo = p.lower[i].unwrap_or(-SYNTH);
        let hi = p.upper[i].unwrap_or(SYNTH);
        aux.set_bounds(i, Some(lo), Some(hi));
    }
    aux.set_bounds(n, Some(-1.0), Some(s0 + 1.0));

    let mut xs = DVector::zeros(n + 1);
    xs.rows_mut(0, n).copy_from(&x0);
    xs[n] = s0;

    let barrier = Barrier::new(&aux);
    let stop = |x: &DVector<f64>| strictly_feasible(p, &x.rows(0, n).clone_owned());
    let res = follow_path(&barrier, &aux.objective, xs, opts, budget, &stop)?;
    let x_part = res.x.rows(0, n).clone_owned();
    if strictly_feasible(p, &x_part) {
        Ok(PhaseOneOutcome::Feasible(x_part))
    } else if res.converged {
        Ok(PhaseOneOutcome::Infeasible)
    } else {
        Ok(PhaseOneOutcome::Budget)
    }
}
