use thiserror::Error;

/// Failure modes shared by the analytic, quantizer, simulator and solver layers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("numeric failure in {operation}: {detail}")]
    NumericFailure {
        operation: &'static str,
        detail: String,
    },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn numeric(operation: &'static str, detail: impl Into<String>) -> Self {
        Error::NumericFailure {
            operation,
            detail: detail.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
