use std::io;
use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("cannot read {path}: {source}")]
    MissingInput { path: PathBuf, source: io::Error },

    #[error("{path}: {message}")]
    Malformed { path: PathBuf, message: String },

    #[error("config {path}:{line}: {message}")]
    Config { path: PathBuf, line: usize, message: String },

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error(transparent)]
    Core(#[from] radtrack_core::Error),

    #[error("cannot write {path}: {source}")]
    Output { path: PathBuf, source: io::Error },
}

impl CliError {
    /// Process exit status. 2 is left to argument-parser usage errors.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::MissingInput { .. } => 3,
            CliError::Malformed { .. } => 4,
            CliError::Config { .. } => 5,
            CliError::Argument(_) => 5,
            CliError::Core(_) => 6,
            CliError::Output { .. } => 7,
        }
    }

    pub(crate) fn malformed(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        CliError::Malformed {
            path: path.into(),
            message: message.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
