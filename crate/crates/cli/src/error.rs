use std::path::{Path, PathBuf};

use mpcg::{DatasetError, RegressionError, SolveError, SparseError};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Runtime(String),
    #[error("model file not found: {}", .0.display())]
    MissingModel(PathBuf),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Runtime(_) => 3,
            CliError::MissingModel(_) => 4,
            CliError::Io { .. } => 5,
        }
    }

    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    /// Input matrices that cannot be read or validated are configuration
    /// errors, whatever the underlying cause.
    pub fn matrix(path: &Path, e: SparseError) -> Self {
        CliError::Config(format!("{}: {e}", path.display()))
    }

    pub fn dataset(path: &Path, e: DatasetError) -> Self {
        match e {
            DatasetError::Io(source) => CliError::io(path, source),
            DatasetError::InvalidSpec(_) | DatasetError::InvalidGrid(_) | DatasetError::Json(_) => {
                CliError::Config(format!("{}: {e}", path.display()))
            }
            other => CliError::Runtime(format!("{}: {other}", path.display())),
        }
    }

    pub fn regression(path: &Path, e: RegressionError) -> Self {
        match e {
            RegressionError::Io(source) => CliError::io(path, source),
            RegressionError::Json(_) | RegressionError::InvalidArgument(_) => {
                CliError::Config(format!("{}: {e}", path.display()))
            }
            other => CliError::Runtime(other.to_string()),
        }
    }
}

impl From<SolveError> for CliError {
    fn from(e: SolveError) -> Self {
        match e {
            SolveError::InvalidArgument(_) | SolveError::DimensionMismatch { .. } => {
                CliError::Config(e.to_string())
            }
            other => CliError::Runtime(other.to_string()),
        }
    }
}
