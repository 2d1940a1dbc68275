use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Caller supplied an out-of-range or inconsistent argument.
    #[error("invalid argument: {0}")]
    Argument(String),
    /// A numerical procedure could not meet its contract.
    #[error("numeric failure: {0}")]
    Numeric(String),
    /// Malformed input file.
    #[error("format error: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn arg<S: Into<String>>(msg: S) -> Error {
    Error::Argument(msg.into())
}
