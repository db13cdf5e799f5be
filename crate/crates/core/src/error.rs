//! Error type shared by all solvers.

use thiserror::Error;

/// Errors produced by the analytic solvers and simulators.
///
/// The CLI maps `NonConvergent` to exit code 3 and every other variant to
/// exit code 2 (invalid configuration / domain).
#[derive(Debug, Clone, Error)]
pub enum Error {
    /// An argument lies outside the mathematical domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Adaptive quadrature or an iterative refinement exhausted its budget
    /// without reaching the requested tolerance.
    #[error("numerical non-convergence: {0}")]
    NonConvergent(String),

    /// A combinatorial quantity left the range where it is computed exactly.
    #[error("overflow: {0}")]
    Overflow(String),

    /// A size guard tripped before allocating or enumerating too much work.
    #[error("capacity exceeded: {0}")]
    CapacityExceeded(String),

    /// No phase transition exists for the requested parameters.
    #[error("no phase transition: {0}")]
    NoTransition(String),

    /// Parameter invariant violated when constructing a domain type.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

pub type Result<T> = std::result::Result<T, Error>;
