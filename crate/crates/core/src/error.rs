use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument violated an operation's precondition.
    #[error("domain error: {0}")]
    Domain(String),
    /// Rejection sampling gave up.
    #[error("rejection budget exhausted after {attempts} attempts")]
    RetryExhausted { attempts: u64 },
    #[error("parse error on line {line}: {message}")]
    Parse { line: usize, message: String },
    /// One entry per offending configuration key.
    #[error("invalid configuration: {}", .0.join("; "))]
    Config(Vec<String>),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
