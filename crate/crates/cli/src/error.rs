use std::fmt;
use std::path::{Path, PathBuf};

/// Failure of one command, carrying its exit status.
#[derive(Debug)]
pub enum CliError {
    /// An input or an earlier command's artifact is absent (exit 2).
    Missing { path: PathBuf, hint: String },
    /// Bad configuration or bad data (exit 3).
    Validation(String),
    /// Anything else (exit 1).
    Internal(anyhow::Error),
}

pub type CliResult<T> = Result<T, CliError>;

impl CliError {
    pub fn missing(path: &Path, hint: impl Into<String>) -> Self {
        CliError::Missing {
            path: path.to_path_buf(),
            hint: hint.into(),
        }
    }

    pub fn validation(msg: impl Into<String>) -> Self {
        CliError::Validation(msg.into())
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Internal(_) => 1,
            CliError::Missing { .. } => 2,
            CliError::Validation(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Missing { path, hint } if hint.is_empty() => write!(f, "missing {}", path.display()),
            CliError::Missing { path, hint } => write!(f, "missing {} ({hint})", path.display()),
            CliError::Validation(msg) => write!(f, "{msg}"),
            CliError::Internal(err) => write!(f, "{err:#}"),
        }
    }
}

impl From<sentcast::Error> for CliError {
    fn from(err: sentcast::Error) -> Self {
        if err.is_validation() {
            CliError::Validation(err.to_string())
        } else {
            CliError::Internal(err.into())
        }
    }
}

impl From<anyhow::Error> for CliError {
    fn from(err: anyhow::Error) -> Self {
        CliError::Internal(err)
    }
}

/// Fails with exit 2 unless `path` exists.
pub fn require(path: &Path, hint: &str) -> CliResult<()> {
    if path.exists() {
        Ok(())
    } else {
        Err(CliError::missing(path, hint))
    }
}
