use thiserror::Error;

/// Errors raised by the laboratory.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument is outside the domain of the operation.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A sample or law has no atoms.
    #[error("empty sample")]
    EmptySample,

    /// A structural invariant of a process, kernel or law does not hold.
    #[error("invariant violated ({invariant}): {detail}")]
    Invariant {
        invariant: &'static str,
        detail: String,
    },

    /// A truncation or residual tolerance could not be met.
    #[error("tolerance exceeded: {0}")]
    Tolerance(String),

    /// Requested work exceeds the configured compute or memory budget.
    #[error("resource budget exceeded: {0}")]
    Budget(String),

    /// An iterative method failed to converge.
    #[error("did not converge: {0}")]
    NonConvergence(String),

    #[error("malformed data: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn invariant(invariant: &'static str, detail: impl Into<String>) -> Self {
        Error::Invariant {
            invariant,
            detail: detail.into(),
        }
    }
}
