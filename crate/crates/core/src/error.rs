use thiserror::Error;

#[derive(Debug, Error)]
pub enum QbcError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid model: {0}")]
    InvalidModel(String),

    /// Malformed input file or document.
    #[error("format error: {0}")]
    Format(String),

    #[error("resource limit exceeded: {0}")]
    ResourceLimit(String),

    /// A loaded model whose parts disagree with each other.
    #[error("model consistency check failed: {0}")]
    Inconsistent(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, QbcError>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(QbcError::InvalidArgument(msg.into()))
}
