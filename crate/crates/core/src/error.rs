use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error)]
pub enum Error {
    /// Input outside the domain of an operation (bad shape, out-of-range
    /// angle, non-orthonormal matrix, ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// Malformed input data (CSV rows, graphs, ...).
    #[error("data error: {0}")]
    Data(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    /// The sampler could not make progress.
    #[error("sampler error: {0}")]
    Sampler(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
