use std::path::PathBuf;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("schema error at `{key}`: {msg}")]
    Schema { key: String, msg: String },
    #[error("numerical failure at step {step}: {msg}")]
    Numerical { step: usize, msg: String },
    #[error("time grid mismatch: {0}")]
    GridMismatch(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{0}")]
    Other(String),
}

impl CliError {
    pub fn schema(key: impl Into<String>, msg: impl Into<String>) -> Self {
        CliError::Schema { key: key.into(), msg: msg.into() }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io { path: path.into(), source }
    }

    /// Process exit code: 2 schema, 3 numerical, 4 time grid, 1 anything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Schema { .. } => 2,
            CliError::Numerical { .. } => 3,
            CliError::GridMismatch(_) => 4,
            CliError::Io { .. } | CliError::Other(_) => 1,
        }
    }
}
