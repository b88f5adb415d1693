use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Unreadable, unparsable or invalid configuration.
    #[error("config error: {0}")]
    Config(String),

    /// The requested work exceeds a compute or memory budget.
    #[error("budget exceeded: {0}")]
    Budget(String),

    /// The output directory holds a different run.
    #[error("refusing to overwrite: {0}")]
    DigestMismatch(String),

    /// A verification suite reported failures.
    #[error("verification failed: {0}")]
    CheckFailed(String),

    #[error("internal error: {0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::DigestMismatch(_) => 2,
            CliError::Budget(_) => 3,
            CliError::CheckFailed(_) | CliError::Internal(_) => 1,
        }
    }

    /// Errors raised while validating inputs: budget violations keep exit 3,
    /// everything else is a configuration error.
    pub fn at_validation(e: cltlab_core::Error) -> Self {
        match e {
            cltlab_core::Error::Budget(m) => CliError::Budget(m),
            other => CliError::Config(other.to_string()),
        }
    }
}

impl From<cltlab_core::Error> for CliError {
    fn from(e: cltlab_core::Error) -> Self {
        match e {
            cltlab_core::Error::Budget(m) => CliError::Budget(m),
            other => CliError::Internal(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Internal(format!("io: {e}"))
    }
}

pub type CliResult<T> = Result<T, CliError>;
