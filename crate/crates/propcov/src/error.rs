//! Error type shared by all modules of the crate.

/// Errors raised by matrix construction, estimation and inference routines.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// A Cholesky pivot fell below the positive-definiteness threshold.
    #[error("matrix is not positive definite")]
    NotPositiveDefinite,

    /// A triangular matrix has a numerically zero diagonal entry.
    #[error("matrix is singular")]
    SingularMatrix,

    /// Input claimed to be symmetric deviates from symmetry beyond round-off.
    #[error("matrix is not symmetric (max asymmetry {max_asymmetry:e})")]
    NotSymmetric { max_asymmetry: f64 },

    /// Operands have incompatible dimensions.
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    /// An operation defined only for two or more groups received fewer.
    #[error("need at least two groups, got {0}")]
    KTooSmall(usize),

    /// Assembled covariance has a diagonal entry below the PSD tolerance.
    #[error("matrix is not positive semidefinite (diagonal entry {0:e})")]
    NotPositiveSemidefinite(f64),

    /// A value is outside its documented domain.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A finite-difference check detected a step size too coarse to trust.
    #[error("finite-difference step too large: {0}")]
    StepTooLarge(String),

    /// Iterative estimation exhausted its iteration budget.
    #[error("estimation did not converge")]
    NotConverged,
}

pub type Result<T> = std::result::Result<T, Error>;
