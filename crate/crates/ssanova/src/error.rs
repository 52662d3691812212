use std::path::PathBuf;

use thiserror::Error;

/// Exit code for usage and schema problems.
pub const EXIT_USAGE: i32 = 2;
/// Exit code for numerical failures.
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("usage error: {0}")]
    Usage(String),

    /// Malformed spec, data or fit file; the message names the offending field.
    #[error("schema error: {0}")]
    Schema(String),

    #[error(transparent)]
    Model(#[from] ssanova_core::Error),

    #[error("cannot access {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io { path: path.into(), source }
    }

    pub fn exit_code(&self) -> i32 {
        use ssanova_core::Error as E;
        match self {
            CliError::Model(E::Solver(_) | E::Degenerate { .. } | E::NonConvergence { .. }) => EXIT_NUMERICAL,
            _ => EXIT_USAGE,
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
