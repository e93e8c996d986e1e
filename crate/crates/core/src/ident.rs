//! Numeric identifiability check: the coprimality clauses of the model
//! structure, each scored by the smallest singular value of a (generalized)
//! Sylvester resultant matrix.

use nalgebra::DMatrix;

use crate::model::ModelParams;

#[derive(Debug, Clone)]
pub struct ClauseReport {
    pub clause: &'static str,
    pub applicable: bool,
    /// `None` when a constant polynomial makes the clause trivially true.
    pub sigma_min: Option<f64>,
    pub pass: bool,
}

#[derive(Debug, Clone)]
pub struct IdentifiabilityReport {
    pub clauses: Vec<ClauseReport>,
    pub pass: bool,
}

fn normalized(c: &[f64]) -> Vec<f64> {
    let n = c.iter().map(|v| v * v).sum::<f64>().sqrt();
    if n == 0.0 {
        c.to_vec()
    } else {
        c.iter().map(|v| v / n).collect()
    }
}

/// Classical Sylvester matrix of two polynomials given highest-degree
/// first; singular iff they share a root.
fn sylvester_sigma_min(p: &[f64], q: &[f64]) -> Option<f64> {
    let n = p.len() - 1;
    let m = q.len() - 1;
    if n == 0 || m == 0 {
        return None;
    }
    let p = normalized(p);
    let q = normalized(q);
    let dim = n + m;
    let mut s = DMatrix::zeros(dim, dim);
    for row in 0..m {
        for (k, &c) in p.iter().enumerate() {
            s[(row, row + k)] = c;
        }
    }
    for row in 0..n {
        for (k, &c) in q.iter().enumerate() {
            s[(m + row, row + k)] = c;
        }
    }
    Some(s.singular_values().min())
}

/// Stacked convolution (generalized resultant) matrix for three
/// polynomials: full row rank iff they have no common factor.
fn triple_sigma_min(ps: [&[f64]; 3]) -> Option<f64> {
    let degs: Vec<usize> = ps.iter().map(|p| p.len() - 1).collect();
    if degs.contains(&0) {
        return None;
    }
    let s: usize = degs.iter().sum();
    let rows = s + 1;
    let cols: usize = degs.iter().map(|&d| s - d + 1).sum();
    let mut m = DMatrix::zeros(rows, cols);
    let mut col = 0;
    for (p, &d) in ps.iter().zip(degs.iter()) {
        let pn = normalized(p);
        for shift in 0..=(s - d) {
            for (k, &c) in pn.iter().enumerate() {
                m[(shift + k, col)] = c;
            }
            col += 1;
        }
    }
    Some(m.singular_values().min())
}

/// Evaluate the six coprimality clauses at the given parameters. A clause
/// passes when it is inapplicable for the orders at hand, trivially true
/// through a constant polynomial, or scores above `tol`.
pub fn check_identifiability(params: &ModelParams, tol: f64) -> IdentifiabilityReport {
    let o = params.orders();
    // z-form coefficient arrays, highest degree first.
    let za = params.a().series();
    let zb = params.b().coeffs().to_vec();
    let zb = if zb.is_empty() { vec![1.0] } else { zb };
    let zf = params.f().series();
    let zc = params.c().series();
    let zd = params.d().series();

    let make = |clause: &'static str, applicable: bool, sigma: Option<f64>| {
        let pass = !applicable || sigma.is_none_or(|s| s > tol);
        ClauseReport { clause, applicable, sigma_min: sigma, pass }
    };

    let clauses = vec![
        make("i: gcd(A, B, C)", true, triple_sigma_min([&za, &zb, &zc])),
        make("ii: gcd(B, F)", true, sylvester_sigma_min(&zb, &zf)),
        make("iii: gcd(C, D)", true, sylvester_sigma_min(&zc, &zd)),
        make("iv: gcd(F, D)", o.pa >= 1, sylvester_sigma_min(&zf, &zd)),
        make("v: gcd(A, B)", o.pd >= 1, sylvester_sigma_min(&za, &zb)),
        make("vi: gcd(A, C)", o.pf >= 1, sylvester_sigma_min(&za, &zc)),
    ];
    let pass = clauses.iter().all(|c| c.pass);
    IdentifiabilityReport { clauses, pass }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::PolynomialCoeffs;

    #[test]
    fn degree_zero_numerator_trivially_coprime() {
        // B(q) = q^{-1} has z-form 1: clause (ii) cannot fail.
        let m = ModelParams::new(
            PolynomialCoeffs::one(),
            PolynomialCoeffs::fir(vec![1.0]),
            PolynomialCoeffs::monic(vec![0.5]),
            PolynomialCoeffs::one(),
            PolynomialCoeffs::one(),
        )
        .unwrap();
        let rep = check_identifiability(&m, 1e-9);
        let ii = &rep.clauses[1];
        assert!(ii.pass && ii.sigma_min.is_none());
        assert!(rep.pass);
    }

    #[test]
    fn shared_root_detected() {
        // z^2 B = z + 0.5 and z F = z + 0.5 share the root -0.5.
        let m = ModelParams::new(
            PolynomialCoeffs::one(),
            PolynomialCoeffs::fir(vec![1.0, 0.5]),
            PolynomialCoeffs::monic(vec![0.5]),
            PolynomialCoeffs::one(),
            PolynomialCoeffs::one(),
        )
        .unwrap();
        let rep = check_identifiability(&m, 1e-9);
        let ii = &rep.clauses[1];
        assert!(!ii.pass, "sigma = {:?}", ii.sigma_min);
        assert!(ii.sigma_min.unwrap() < 1e-12);
        assert!(!rep.pass);
    }

    #[test]
    fn case_study_parameters_pass() {
        let m = ModelParams::ararx(&[0.9, 0.6, 0.2, 0.3], &[-1.2, 0.75, -0.2]);
        let rep = check_identifiability(&m, 1e-9);
        assert!(rep.pass, "{:?}", rep.clauses);
    }

    #[test]
    fn triple_clause_detects_global_common_factor() {
        // A, B and C all divisible by (z - 0.5).
        let m = ModelParams::new(
            PolynomialCoeffs::monic(vec![-0.5]),
            PolynomialCoeffs::fir(vec![1.0, -0.5]),
            PolynomialCoeffs::one(),
            PolynomialCoeffs::monic(vec![-0.5]),
            PolynomialCoeffs::one(),
        )
        .unwrap();
        let rep = check_identifiability(&m, 1e-9);
        assert!(!rep.clauses[0].pass, "sigma = {:?}", rep.clauses[0].sigma_min);
    }

    #[test]
    fn triple_clause_passes_when_one_pair_coprime() {
        // A and C share (z - 0.5) but B does not: no global factor.
        let m = ModelParams::new(
            PolynomialCoeffs::monic(vec![-0.5]),
            PolynomialCoeffs::fir(vec![1.0, 0.3]),
            PolynomialCoeffs::one(),
            PolynomialCoeffs::monic(vec![-0.5]),
            PolynomialCoeffs::one(),
        )
        .unwrap();
        let rep = check_identifiability(&m, 1e-9);
        assert!(rep.clauses[0].pass);
    }

    #[test]
    fn resultant_oracle_on_pair() {
        // Determinant of the Sylvester matrix is the resultant; for
        // (z + a)(z + b) against (z + a) it vanishes iff a root is shared.
        let coprime = sylvester_sigma_min(&[1.0, 0.7], &[1.0, -0.7]).unwrap();
        assert!(coprime > 1e-3);
        let shared = sylvester_sigma_min(&[1.0, 0.7], &[1.0, 0.7]).unwrap();
        assert!(shared < 1e-14);
    }
}
