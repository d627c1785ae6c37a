use thiserror::Error;

/// Errors produced by the solver library.
#[derive(Debug, Error)]
pub enum Error {
    /// The symmetric eigensolver did not converge.
    #[error("eigendecomposition failed for a {n}x{n} matrix (norm {norm:.3e})")]
    EigenFailed { n: usize, norm: f64 },

    /// Inputs with inconsistent dimensions.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// A matrix required to be positive semidefinite is not.
    #[error("matrix is not positive semidefinite (lambda_min = {lambda_min:.3e})")]
    NotPsd { lambda_min: f64 },

    /// A linear operator with no nonzero row.
    #[error("linear operator is identically zero")]
    ZeroOperator,

    /// An operation needed a strictly feasible point but none is recorded.
    #[error("problem carries no strictly feasible point")]
    MissingStrictlyFeasible,

    /// An operation defined only for equality-constrained problems.
    #[error("operation requires equality constraints only")]
    NonEqualityRows,

    /// Problem data rejected at construction.
    #[error("invalid problem data: {0}")]
    InvalidProblem(String),

    /// Solver configuration rejected.
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    /// A multiplier vector lies outside the dual cone Q.
    #[error("point lies outside the dual cone")]
    OutsideCone,

    /// The inner solver produced non-finite iterates.
    #[error("inner solver diverged: {0}")]
    InnerDiverged(String),

    /// An alternating-projection oracle hit its iteration cap.
    #[error("projection oracle stalled after {max_iter} sweeps (last change {last_change:.3e})")]
    ProjectionStalled { max_iter: usize, last_change: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
