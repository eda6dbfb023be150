use std::path::Path;
use std::process::ExitCode;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad flags or values.
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Lib(#[from] stiefel_givens::Error),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("check suite failed")]
    ChecksFailed,
}

pub type CliResult<T> = Result<T, CliError>;

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.display().to_string(),
            source,
        }
    }

    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(match self {
            CliError::Usage(_) => 1,
            CliError::Lib(stiefel_givens::Error::Io(_)) => 2,
            CliError::Lib(_) => 1,
            CliError::Io { .. } => 2,
            CliError::ChecksFailed => 3,
        })
    }
}
