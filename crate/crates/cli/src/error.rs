use std::path::PathBuf;

use soc_metrology::Error as CoreError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid config: {0}")]
    Config(String),
    #[error("{context}: {source}")]
    Numerical {
        context: String,
        #[source]
        source: CoreError,
    },
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    /// 0 success, 2 invalid config, 3 numerical non-convergence, 4 i/o.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical { .. } => 3,
            CliError::Io { .. } => 4,
        }
    }

    /// Maps a library error at a sweep point; argument errors are config errors.
    pub fn at(context: impl Into<String>, err: CoreError) -> Self {
        let context = context.into();
        match err {
            CoreError::InvalidArgument(_) | CoreError::OutOfPhase { .. } | CoreError::Unsupported(_) | CoreError::Domain(_) => {
                CliError::Config(format!("{context}: {err}"))
            }
            _ => CliError::Numerical { context, source: err },
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io { path: path.into(), source }
    }
}

pub type CliResult<T> = Result<T, CliError>;
