use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] modalmr_core::Error),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{}:{line}: {reason}", path.display())]
    Parse {
        path: PathBuf,
        line: usize,
        reason: String,
    },

    #[error("invalid value for `{name}`: {reason}")]
    Invalid { name: String, reason: String },

    #[error("unknown config key `{key}` (valid keys: {valid})")]
    UnknownKey { key: String, valid: String },

    #[error("{0}")]
    Usage(String),
}

impl CliError {
    pub fn invalid(name: &str, reason: impl Into<String>) -> Self {
        CliError::Invalid {
            name: name.to_string(),
            reason: reason.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    /// 2 for numeric failures, 1 for everything the caller got wrong.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(e) if e.is_numeric() => 2,
            _ => 1,
        }
    }
}
