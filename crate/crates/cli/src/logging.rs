//! Verbosity control via the `MOTO_LOG` environment variable.
//!
//! `quiet` suppresses progress output, `info` (the default) prints it, and
//! `debug` adds detail. Command results — evaluation reports, predictions,
//! requested dumps — print unconditionally; verbosity only governs the
//! narration around them. Nothing here emits timestamps: output must be
//! identical across runs.

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Verbosity {
    Quiet,
    Info,
    Debug,
}

impl Verbosity {
    fn parse(value: Option<&str>) -> Result<Self> {
        match value {
            None | Some("") | Some("info") => Ok(Verbosity::Info),
            Some("quiet") => Ok(Verbosity::Quiet),
            Some("debug") => Ok(Verbosity::Debug),
            Some(other) => Err(CliError::usage(format!(
                "MOTO_LOG={other:?} is not a verbosity (use quiet, info, or debug)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Logger {
    level: Verbosity,
}

impl Logger {
    pub fn from_env() -> Result<Self> {
        let value = match std::env::var("MOTO_LOG") {
            Ok(v) => Some(v),
            Err(std::env::VarError::NotPresent) => None,
            Err(std::env::VarError::NotUnicode(_)) => {
                return Err(CliError::usage("MOTO_LOG is not valid UTF-8"))
            }
        };
        Ok(Logger {
            level: Verbosity::parse(value.as_deref())?,
        })
    }

    pub fn info(&self, msg: impl AsRef<str>) {
        if self.level >= Verbosity::Info {
            println!("{}", msg.as_ref());
        }
    }

    pub fn debug(&self, msg: impl AsRef<str>) {
        if self.level >= Verbosity::Debug {
            println!("{}", msg.as_ref());
        }
    }
}
