use thiserror::Error;

/// Failure modes shared across the library.
#[derive(Debug, Error)]
pub enum Error {
    /// A structural precondition on arguments does not hold.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    /// A level, depth, or enumeration cap would be exceeded.
    #[error("cap exceeded: {0}")]
    CapExceeded(String),
    /// A sequence or gauge fails a declared validation check.
    #[error("validation failed [{check}]: {detail}")]
    Validation { check: String, detail: String },
    /// An infinite tail cannot be bounded by the supplied spec.
    #[error("tail does not certify: {0}")]
    TailDiverges(String),
    /// Malformed textual input (rationals, words, gauge rules).
    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub fn cap(msg: impl Into<String>) -> Self {
        Error::CapExceeded(msg.into())
    }

    pub fn parse(msg: impl Into<String>) -> Self {
        Error::Parse(msg.into())
    }

    pub fn validation(check: impl Into<String>, detail: impl Into<String>) -> Self {
        Error::Validation {
            check: check.into(),
            detail: detail.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
