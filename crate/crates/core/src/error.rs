//! Error type shared by all modules of the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A polynomial that must be stable (all roots of its z-form strictly
    /// inside the unit disc) is not.
    #[error("stability assumption violated: {0}")]
    Assumption1Violation(String),

    /// Dimension mismatch between inputs.
    #[error("shape mismatch: {0}")]
    Shape(String),

    /// Parameter vector lies outside the admissible predictor domain
    /// (unstable C or F polynomial).
    #[error("domain violation: {0}")]
    DomainViolation(String),

    /// Operation requires a polynomial of order at least one.
    #[error("degenerate order: {0}")]
    DegenerateOrder(String),

    /// Matrix-product enumeration would exceed the configured budget.
    #[error("product budget exceeded: {0}")]
    BudgetExceeded(String),

    /// No strictly feasible point exists (or none was found by phase I).
    #[error("infeasible: {0}")]
    Infeasible(String),

    /// Iteration cap reached before convergence.
    #[error("iteration limit reached: {0}")]
    MaxIter(String),

    /// Generic numerical failure (singular factorization, overflow).
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// The autocorrelation sequence does not define a nonnegative spectrum.
    #[error("spectrum is not positive semidefinite: {0}")]
    NotPsdSpectrum(String),

    /// Requested realization order is smaller than the filter's effective order.
    #[error("order too small: {0}")]
    Order(String),

    /// The operation requires a different model structure.
    #[error("unsupported model structure: {0}")]
    Structure(String),

    /// Information matrix is singular or indefinite.
    #[error("singular information matrix: {0}")]
    SingularInformation(String),

    /// An integrated trajectory left the admissible domain.
    #[error("ODE trajectory left the admissible domain at t = {0}")]
    OdeExitedDomain(f64),
}

pub type Result<T> = std::result::Result<T, Error>;
