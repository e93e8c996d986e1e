//! Stability certificates: companion matrices, joint-spectral-radius upper
//! bounds for switched systems, and common-Lyapunov feasibility over
//! polytope vertices.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::poly::{companion_from_tail, PolyKind, PolynomialCoeffs};
use crate::sdp::{self, LmiBlock, SdpProblem, SdpStatus, SolveOptions};

/// Default cap on the number of matrices formed during product enumeration.
pub const DEFAULT_PRODUCT_BUDGET: usize = 200_000;

/// A finite set of equally sized square matrices (a polytope vertex set).
#[derive(Debug, Clone)]
pub struct MatrixFamily {
    members: Vec<DMatrix<f64>>,
}

impl MatrixFamily {
    pub fn new(members: Vec<DMatrix<f64>>) -> Result<Self> {
        let Some(first) = members.first() else {
            return Err(Error::Shape("matrix family must be nonempty".into()));
        };
        let d = first.nrows();
        if members.iter().any(|m| m.nrows() != d || m.ncols() != d) {
            return Err(Error::Shape("family members must be square and equally sized".into()));
        }
        Ok(Self { members })
    }

    pub fn members(&self) -> &[DMatrix<f64>] {
        &self.members
    }

    pub fn dim(&self) -> usize {
        self.members[0].nrows()
    }
}

/// Companion matrix of a monic backward-shift polynomial: first row
/// `(-c_1 .. -c_p)`, identity on the subdiagonal. Order zero gives the
/// empty matrix by convention.
pub fn companion(poly: &PolynomialCoeffs) -> DMatrix<f64> {
    debug_assert_eq!(poly.kind(), PolyKind::Monic);
    companion_from_tail(poly.coeffs())
}

fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 {
        return 0.0;
    }
    m.clone().singular_values().max()
}

/// Upper bound on the joint spectral radius:
/// `min over k <= depth of max over length-k products ||P||_2^{1/k}`.
/// Monotone non-increasing in `depth` by the running minimum.
pub fn jsr_upper_bound(family: &MatrixFamily, depth: usize) -> Result<f64> {
    jsr_upper_bound_with_budget(family, depth, DEFAULT_PRODUCT_BUDGET)
}

pub fn jsr_upper_bound_with_budget(
    family: &MatrixFamily,
    depth: usize,
    budget: usize,
) -> Result<f64> {
    if depth == 0 {
        return Err(Error::Shape("depth must be at least one".into()));
    }
    let k = family.members.len();
    let mut count: usize = 0;
    let mut level = k;
    for _ in 0..depth {
        count = count.saturating_add(level);
        if count > budget {
            return Err(Error::BudgetExceeded(format!(
                "enumerating {k}^1..{k}^{depth} products exceeds budget {budget}"
            )));
        }
        level = level.saturating_mul(k);
    }

    let mut bound = f64::INFINITY;
    let mut products: Vec<DMatrix<f64>> = family.members.clone();
    for len in 1..=depth {
        let worst = products.iter().map(spectral_norm).fold(0.0, f64::max);
        bound = bound.min(worst.powf(1.0 / len as f64));
        if worst == 0.0 {
            break;
        }
        if len < depth {
            let mut next = Vec::with_capacity(products.len() * k);
            for p in &products {
                for m in &family.members {
                    next.push(m * p);
                }
            }
            products = next;
        }
    }
    Ok(bound)
}

#[derive(Debug, Clone)]
pub struct CommonLyapunov {
    pub v: DMatrix<f64>,
    pub lambda: f64,
}

/// Search for a single positive definite `V` with `A' V A <= lambda V`
/// (`lambda < 1`) across all family members, via the vertex LMIs
/// `V - A' V A >= eps I`, `V >= I`. Returns the achieved contraction
/// factor. Feasibility is sufficient for joint stability; infeasibility
/// carries no certificate.
pub fn common_lyapunov(family: &MatrixFamily) -> Result<CommonLyapunov> {
    let d = family.dim();
    if d == 0 {
        return Ok(CommonLyapunov { v: DMatrix::zeros(0, 0), lambda: 0.0 });
    }
    let nv = d * (d + 1) / 2;
    let idx = |i: usize, j: usize| -> usize {
        debug_assert!(i <= j);
        j * (j + 1) / 2 + i
    };
    let basis = |i: usize, j: usize| -> DMatrix<f64> {
        let mut e = DMatrix::zeros(d, d);
        e[(i, j)] = 1.0;
        e[(j, i)] = 1.0;
        if i == j {
            e[(i, i)] = 1.0;
        }
        e
    };

    // Objective: minimize trace(V).
    let mut c = DVector::zeros(nv);
    for i in 0..d {
        c[idx(i, i)] = 1.0;
    }
    let mut p = SdpProblem::new(nv, c);

    // V >= I.
    {
        let mut terms = Vec::new();
        for j in 0..d {
            for i in 0..=j {
                terms.push((idx(i, j), basis(i, j)));
            }
        }
        p.add_block(LmiBlock { f0: -DMatrix::identity(d, d), terms });
    }

    // Strictness margin scaled to the family.
    let scale = family
        .members
        .iter()
        .map(spectral_norm)
        .fold(1.0f64, f64::max);
    let eps = 1e-6 * scale * scale;

    for a in &family.members {
        let mut terms = Vec::new();
        for j in 0..d {
            for i in 0..=j {
                let e = basis(i, j);
                let coeff = &e - a.transpose() * &e * a;
                terms.push((idx(i, j), coeff));
            }
        }
        p.add_block(LmiBlock {
            f0: DMatrix::from_diagonal_element(d, d, -eps),
            terms,
        });
    }

    let sol = sdp::solve(&p, &SolveOptions::default())?;
    match sol.status {
        SdpStatus::Optimal => {}
        SdpStatus::Infeasible => {
            return Err(Error::Infeasible("no common Lyapunov matrix at the vertices".into()))
        }
        SdpStatus::MaxIter => return Err(Error::MaxIter("common Lyapunov search".into())),
    }

    let mut v = DMatrix::zeros(d, d);
    for j in 0..d {
        for i in 0..=j {
            v[(i, j)] = sol.x[idx(i, j)];
            v[(j, i)] = sol.x[idx(i, j)];
        }
    }
    // Achieved contraction factor: max generalized eigenvalue of
    // (A' V A, V) over the family.
    let chol = nalgebra::Cholesky::new(v.clone())
        .ok_or_else(|| Error::Numerical("returned V is not positive definite".into()))?;
    let linv = chol.l().try_inverse().ok_or_else(|| Error::Numerical("singular factor".into()))?;
    let mut lambda = 0.0f64;
    for a in &family.members {
        let mid = &linv * (a.transpose() * &v * a) * linv.transpose();
        let sym = (&mid + mid.transpose()) * 0.5;
        let top = sym.symmetric_eigenvalues().iter().copied().fold(f64::NEG_INFINITY, f64::max);
        lambda = lambda.max(top);
    }
    Ok(CommonLyapunov { v, lambda })
}
