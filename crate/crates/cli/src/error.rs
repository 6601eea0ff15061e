use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),

    #[error("config {path}: {message}")]
    Config { path: String, message: String },

    #[error(transparent)]
    Core(#[from] lineup_core::Error),

    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn config(path: impl AsRef<Path>, message: impl ToString) -> Self {
        CliError::Config {
            path: path.as_ref().display().to_string(),
            message: message.to_string(),
        }
    }

    pub fn io(path: impl AsRef<Path>, source: std::io::Error) -> Self {
        CliError::Core(lineup_core::Error::io(path, source))
    }

    /// 2 for usage and input problems, 3 for runtime and numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Config { .. } => 2,
            CliError::Core(e) if e.is_input_error() => 2,
            CliError::Core(_) | CliError::Runtime(_) => 3,
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
