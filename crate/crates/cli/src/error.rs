use std::path::PathBuf;

use sprdyn_core::Error as CoreError;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),

    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },

    /// A config file failed to parse or validate; `field` names the culprit when known.
    #[error("{}: {msg}", path.display())]
    Config { path: PathBuf, msg: String },

    #[error("{}: {msg}", path.display())]
    Csv { path: PathBuf, msg: String },

    #[error(transparent)]
    Core(#[from] CoreError),
}

pub type CliResult<T> = Result<T, CliError>;

pub const EXIT_OK: u8 = 0;
pub const EXIT_VERIFY_FAILED: u8 = 1;
pub const EXIT_USAGE: u8 = 2;
pub const EXIT_NUMERICAL: u8 = 3;

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(e) => core_exit_code(e),
            _ => EXIT_USAGE,
        }
    }

    pub fn config(path: impl Into<PathBuf>, msg: impl Into<String>) -> Self {
        CliError::Config { path: path.into(), msg: msg.into() }
    }
}

/// Bad inputs map to 2; failures of the numerics themselves to 3.
pub fn core_exit_code(e: &CoreError) -> u8 {
    match e {
        CoreError::InsufficientSamples { .. } | CoreError::DimensionMismatch { .. } | CoreError::InvalidParameter(_) => {
            EXIT_USAGE
        }
        _ => EXIT_NUMERICAL,
    }
}
