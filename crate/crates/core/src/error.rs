use thiserror::Error;

/// Errors raised by the numerical kernels and the run harness.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("argument out of the supported range: {0}")]
    Range(String),

    #[error("size mismatch: {0}")]
    Size(String),

    #[error("unsupported order: {0}")]
    UnsupportedOrder(String),

    #[error("singular case: {0}")]
    Singular(String),

    #[error("unresolvable width: {0}")]
    Resolution(String),

    #[error("series truncation failed: {0}")]
    Truncation(String),

    #[error("fixed-point iteration diverged: {0}")]
    Divergence(String),

    #[error("operator norm gate failed: {0}")]
    NormGate(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("configuration error:\n{0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
