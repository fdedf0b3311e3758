use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// `A_{k} - alpha_{k}^2 <= 0` at the reported index: the only finite-free
    /// dual choice is `u = infinity`, so no finite error coefficients exist.
    #[error(
        "degenerate stepsize at k={index}: A_k - alpha_k^2 = {gap:e} <= 0, \
         u = infinity is the unique feasible choice"
    )]
    DegenerateStepsize { index: usize, gap: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("numerical failure (non-finite iterate) at iteration {iteration}")]
    NumericalFailure { iteration: usize },

    #[error("unknown problem '{0}'")]
    UnknownProblem(String),

    #[error("optimal value f_* is not known for this problem")]
    UnknownOptimum,

    #[error("value out of range: {0}")]
    OutOfRange(String),

    #[error("SDPA parse error at line {line}: {msg}")]
    SdpaParse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
