use std::path::Path;

use thiserror::Error;

/// Failures surfaced by the command-line front end.
///
/// Exit codes: 2 for configuration and validation errors, 3 for numerical
/// failures (including a failed `--validate` check), 4 for I/O.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Core(#[from] mvhawkes_core::Error),

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("output directory {0} is in use by another run (remove the stale .lock file if none is running)")]
    Locked(String),

    #[error("validation failed: {0}")]
    CheckFailed(String),
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.display().to_string(),
            source,
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Core(e) if e.is_validation() => 2,
            CliError::Core(mvhawkes_core::Error::Io(_)) => 4,
            CliError::Core(_) => 3,
            CliError::Io { .. } | CliError::Locked(_) => 4,
            CliError::CheckFailed(_) => 3,
        }
    }
}
