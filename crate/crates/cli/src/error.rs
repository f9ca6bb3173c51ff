//! CLI error type and the process exit-code contract.
//!
//! Exit codes: 0 success, 2 input error (bad flags, bad config, unreadable
//! or malformed files), 3 numeric failure (training diverged), 4
//! incompatibility (artifacts that do not fit together).

use std::fmt;

use moto_core::error::Error as CoreError;

#[derive(Debug)]
pub enum CliError {
    /// Bad invocation or configuration: missing or invalid flags, malformed
    /// config file, impossible hyperparameter combinations.
    Usage(String),
    /// An error surfaced by the pipeline itself.
    Core(CoreError),
}

impl CliError {
    pub fn usage(msg: impl Into<String>) -> Self {
        CliError::Usage(msg.into())
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Core(e) => match e {
                CoreError::Io { .. } | CoreError::Parse { .. } => 2,
                CoreError::Numeric(_) => 3,
                CoreError::Incompatible(_) => 4,
            },
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(msg) => write!(f, "{msg}"),
            CliError::Core(e) => write!(f, "{e}"),
        }
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        CliError::Core(e)
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
