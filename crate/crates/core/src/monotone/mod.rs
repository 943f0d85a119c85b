//! Maximal monotone operators on R^d and the maps the solver needs from them.
//!
//! The catalog is closed: the zero operator, normal cones of convex sets,
//! subdifferentials of a few convex functions, and linear maps with a
//! positive semidefinite symmetric part. Each of these has an exact
//! resolvent `J_λ = (I + λA)⁻¹`, which is what the implicit solver step uses.
//!
//! Normal cones have domain `C` rather than all of R^d. They are offered as
//! the reflected-dynamics extension; [`MonotoneOperator::full_domain`]
//! reports which kinds satisfy the full-domain assumption.

mod audit;
mod convex_set;
mod operator;

pub use audit::{audit_monotonicity, MonotonicityAudit};
pub use convex_set::ConvexSet;
pub use operator::{ConvexFunction, MinimalSection, MonotoneOperator, PreparedResolvent};

use thiserror::Error;

/// Absolute tolerance for membership and idempotence checks.
pub const MEMBERSHIP_TOL: f64 = 1e-10;

/// Iteration budget for Dykstra's alternating projections.
pub const DYKSTRA_MAX_ITER: usize = 10_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MonotoneError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("dimension mismatch: operator acts on R^{expected}, got a point in R^{got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("alternating projections did not converge within {iterations} iterations")]
    Convergence { iterations: usize },
    #[error("infeasible set: {0}")]
    Infeasible(String),
}
