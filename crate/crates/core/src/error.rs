use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BlitzError {
    /// A caller violated an operation's precondition.
    #[error("usage error: {0}")]
    Usage(String),
    /// The gap is zero (or negligible) so the requested geometry is undefined.
    #[error("already converged")]
    Converged,
    #[error("solver failure at iteration {iteration}: {message}")]
    Solver { iteration: usize, message: String },
}

pub type Result<T> = std::result::Result<T, BlitzError>;

pub(crate) fn usage<T>(msg: impl Into<String>) -> Result<T> {
    Err(BlitzError::Usage(msg.into()))
}
