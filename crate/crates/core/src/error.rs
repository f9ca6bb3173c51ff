//! Error type shared by the data-handling and training paths.
//!
//! Shape and contract violations inside the numeric kernels are programmer
//! errors and panic instead; `Error` covers conditions a correct program can
//! hit at runtime: unreadable files, malformed input, artifacts that do not
//! match, and numeric blow-ups during training.

use std::path::Path;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },

    /// Inputs that are individually well-formed but do not fit together,
    /// e.g. an evaluation corpus with labels a checkpoint never saw.
    #[error("{0}")]
    Incompatible(String),

    /// Non-finite values encountered where training cannot continue.
    #[error("{0}")]
    Numeric(String),
}

impl Error {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        Error::Io {
            path: path.display().to_string(),
            source,
        }
    }

    pub fn parse(path: &Path, line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            path: path.display().to_string(),
            line,
            msg: msg.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
