//! Adaptive optimal input design for SISO LTI system identification.
//!
//! The crate provides the pieces of a certainty-equivalence adaptive
//! experiment-design loop: simulation of the model class, the recursive
//! prediction-error estimator with resetting, stability certificates for
//! the switched closed loop, a small dense SDP solver, the LMI-constrained
//! input-spectrum design with spectral factorization, and asymptotic
//! diagnostics (information matrix, covariance, associated ODE).

pub mod analysis;
pub mod design;
pub mod error;
pub mod estimator;
pub mod freq;
pub mod ident;
pub mod model;
pub mod noise;
pub mod poly;
pub mod regressor;
pub mod sdp;
pub mod sim;
pub mod stability;
pub mod statespace;

pub use error::{Error, Result};
pub use model::{ModelOrders, ModelParams};
pub use poly::{PolyKind, PolynomialCoeffs};
pub use statespace::StateSpace;
