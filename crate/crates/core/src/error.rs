use thiserror::Error;

/// Errors raised by the toolkit.
///
/// Numerical divergence is not an error: it is reported through
/// [`crate::kernel::Extended`] or flagged report rows.
#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("index {index} out of range for {len} interfaces")]
    Index { index: usize, len: usize },
    #[error("audit failure: {0}")]
    Audit(String),
    #[error("format error: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
