use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    /// k >= k_c: the stripe phase is not modeled.
    #[error("coupling ratio k/k_c = {ratio} is outside the normal phase (must be < 1)")]
    OutOfPhase { ratio: f64 },
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("not converged: {0}")]
    Convergence(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    /// Grid does not cover the state it is asked to represent.
    #[error("domain error: {0}")]
    Domain(String),
    #[error("estimation failed: {0}")]
    Estimation(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
