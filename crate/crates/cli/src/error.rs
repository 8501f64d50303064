use thiserror::Error;

/// Failure classes, each with its own exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("infeasible: {0}")]
    Infeasible(String),
    #[error("numeric failure: {0}")]
    Numeric(String),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn usage(msg: impl Into<String>) -> Self {
        CliError::Usage(msg.into())
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Infeasible(_) => 3,
            CliError::Numeric(_) => 4,
            CliError::Io(_) => 1,
        }
    }
}

impl From<qmimo::Error> for CliError {
    fn from(e: qmimo::Error) -> Self {
        match e {
            qmimo::Error::InvalidArgument(m) => CliError::Usage(m),
            e @ qmimo::Error::NumericFailure { .. } => CliError::Numeric(e.to_string()),
        }
    }
}
