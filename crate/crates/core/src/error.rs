use alloc::string::String;
use core::fmt;

/// Errors produced by core operations.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A structural or numeric precondition was violated.
    InvalidArgument(String),
    /// A computation produced a non-finite value and cannot continue.
    NonFinite(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidArgument(msg) => write!(f, "invalid argument: {msg}"),
            Error::NonFinite(msg) => write!(f, "non-finite value: {msg}"),
        }
    }
}

impl core::error::Error for Error {}

pub type Result<T> = core::result::Result<T, Error>;

/// Shorthand for `Error::InvalidArgument`.
pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
