use std::path::PathBuf;

/// Failures surfaced by the command-line front end.
///
/// Each variant maps onto one process exit code, see [`CliError::exit_code`].
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("invalid input: {0}")]
    Config(String),

    #[error("cannot access {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("fit stage failed: {0}")]
    Fit(#[source] bellfit_core::Error),
}

impl CliError {
    pub fn config(context: &str, err: impl std::fmt::Display) -> Self {
        CliError::Config(format!("{context}: {err}"))
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Io { .. } => 3,
            CliError::Fit(_) => 4,
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
