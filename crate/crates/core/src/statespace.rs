//! Discrete-time state-space realizations.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::poly::{companion_from_tail, conv};

/// A discrete-time linear system `x' = A x + B u, y = C x + D u`.
#[derive(Debug, Clone, PartialEq)]
pub struct StateSpace {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub c: DMatrix<f64>,
    pub d: DMatrix<f64>,
}

impl StateSpace {
    pub fn new(a: DMatrix<f64>, b: DMatrix<f64>, c: DMatrix<f64>, d: DMatrix<f64>) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n || b.nrows() != n || c.ncols() != n {
            return Err(Error::Shape("inconsistent state dimension".into()));
        }
        if d.nrows() != c.nrows() || d.ncols() != b.ncols() {
            return Err(Error::Shape("inconsistent input/output dimension".into()));
        }
        Ok(Self { a, b, c, d })
    }

    pub fn nstates(&self) -> usize {
        self.a.nrows()
    }

    pub fn ninputs(&self) -> usize {
        self.b.ncols()
    }

    pub fn spectral_radius(&self) -> f64 {
        if self.a.nrows() == 0 {
            return 0.0;
        }
        self.a
            .complex_eigenvalues()
            .iter()
            .map(|l| l.norm())
            .fold(0.0, f64::max)
    }

    pub fn is_internally_stable(&self) -> bool {
        self.spectral_radius() < 1.0
    }

    /// Impulse response of output 0 to a unit impulse on `input` at n = 0.
    pub fn impulse_response(&self, input: usize, nsteps: usize) -> Vec<f64> {
        let mut x = DVector::zeros(self.nstates());
        let mut out = Vec::with_capacity(nsteps);
        for n in 0..nsteps {
            let u = if n == 0 { 1.0 } else { 0.0 };
            let y = (self.c.row(0) * &x)[0] + self.d[(0, input)] * u;
            out.push(y);
            x = &self.a * &x + self.b.column(input) * u;
        }
        out
    }
}

/// Controller-canonical realization of `num(q)/den(q)` with `num` zero-constant
/// and `den` monic, both given as full series starting at `q^0`.
fn realize_strictly_proper(num: &[f64], den: &[f64]) -> (DMatrix<f64>, DVector<f64>, DVector<f64>) {
    let n = num.len().max(den.len()) - 1;
    let mut alpha = vec![0.0; n];
    for (j, &c) in den.iter().skip(1).enumerate() {
        alpha[j] = c;
    }
    let mut beta = vec![0.0; n];
    for (j, &c) in num.iter().skip(1).enumerate() {
        beta[j] = c;
    }
    let a = companion_from_tail(&alpha);
    let mut b = DVector::zeros(n);
    if n > 0 {
        b[0] = 1.0;
    }
    let c = DVector::from_vec(beta);
    (a, b, c)
}

/// Realization of the model as
/// `xi' = A_xi xi + B_xi u + K_xi e, y = C_xi xi + e`,
/// returned with `B = [B_xi | K_xi]` and `D = [0 1]`.
///
/// The deterministic part `B/(AF)` and the strictly proper noise part
/// `C/(AD) - 1` are realized separately in controller-canonical form and
/// stacked; under the stability assumption the result is internally stable
/// and inversely stable from `y` to `e`.
pub fn to_state_space(params: &ModelParams) -> Result<StateSpace> {
    params.require_assumption1()?;

    let den_u = conv(&params.a().series(), &params.f().series());
    let num_u = params.b().series();
    let (au, bu, cu) = realize_strictly_proper(&num_u, &den_u);

    let den_e = conv(&params.a().series(), &params.d().series());
    let mut num_e = params.c().series();
    if num_e.len() < den_e.len() {
        num_e.resize(den_e.len(), 0.0);
    }
    for (ne, de) in num_e.iter_mut().zip(den_e.iter()) {
        *ne -= de;
    }
    let (ae, be, ce) = realize_strictly_proper(&num_e, &den_e);

    let nu = au.nrows();
    let ne = ae.nrows();
    let n = nu + ne;
    let mut a = DMatrix::zeros(n, n);
    a.view_mut((0, 0), (nu, nu)).copy_from(&au);
    a.view_mut((nu, nu), (ne, ne)).copy_from(&ae);
    let mut b = DMatrix::zeros(n, 2);
    b.view_mut((0, 0), (nu, 1)).copy_from(&bu);
    b.view_mut((nu, 1), (ne, 1)).copy_from(&be);
    let mut c = DMatrix::zeros(1, n);
    c.view_mut((0, 0), (1, nu)).copy_from(&cu.transpose());
    c.view_mut((0, nu), (1, ne)).copy_from(&ce.transpose());
    let d = DMatrix::from_row_slice(1, 2, &[0.0, 1.0]);

    let ss = StateSpace::new(a, b, c, d)?;
    if !ss.is_internally_stable() {
        return Err(Error::Assumption1Violation(
            "realized transition matrix is not stable".into(),
        ));
    }
    // Inverse stability from y to e: A_xi - K_xi C_xi must be stable.
    if ss.nstates() > 0 {
        let k = ss.b.column(1).clone_owned();
        let acl = &ss.a - &k * ss.c.row(0);
        let rho = acl
            .complex_eigenvalues()
            .iter()
            .map(|l| l.norm())
            .fold(0.0, f64::max);
        if rho >= 1.0 {
            return Err(Error::Assumption1Violation(
                "inverse system from y to e is not stable".into(),
            ));
        }
    }
    Ok(ss)
}
