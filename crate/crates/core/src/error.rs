use thiserror::Error;

/// Errors raised by the algorithms in this crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("non-finite coordinate or weight: {0}")]
    NonFinite(&'static str),

    #[error("zero mass: {0}")]
    ZeroMass(&'static str),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("unknown generator kind: {0}")]
    UnknownKind(String),

    #[error("mismatched inputs: {0}")]
    Mismatch(String),

    #[error("insufficient data: {0}")]
    Insufficient(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed file {path}: {message}")]
    Format { path: String, message: String },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
