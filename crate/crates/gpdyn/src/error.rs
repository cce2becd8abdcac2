//! Crate-wide error type.

use thiserror::Error;

/// Errors raised by the gpdyn library.
#[derive(Debug, Error)]
pub enum Error {
    /// An input matrix or vector contains NaN or infinite entries.
    #[error("non-finite entries in {0}")]
    NonFinite(&'static str),

    /// Shapes of the supplied operands do not agree.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// Adaptive quadrature failed to stabilize within the node budget.
    #[error("quadrature did not converge within {max_nodes} nodes")]
    NoConvergence { max_nodes: usize },

    /// A factorization or conditioning failure that jitter could not repair.
    #[error("numerical breakdown: {0}")]
    NumericalBreakdown(String),

    /// A regressor window was requested from a history that is too short.
    #[error("insufficient history: {0}")]
    InsufficientHistory(String),

    /// A step distribution has (numerically) zero variance where a positive
    /// one is required.
    #[error("degenerate variance: {0}")]
    DegenerateVariance(String),

    /// The kernel family has no finite upper bound, so no boundedness
    /// certificate exists.
    #[error("kernel family is unbounded")]
    UnboundedKernel,

    /// The counterexample probability is undefined at the origin.
    #[error("initial state must be nonzero")]
    ZeroInitialState,

    /// A state left the domain on which the dynamics are defined.
    #[error("domain error: {0}")]
    DomainError(String),

    /// An argument violates a documented precondition.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, Error>;
