use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// The scenario or the command line is malformed or inconsistent.
    #[error("invalid scenario: {0}")]
    Validation(String),
    #[error(transparent)]
    Core(#[from] sdefl_core::Error),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{}: {reason}", path.display())]
    Csv { path: PathBuf, reason: String },
}

impl CliError {
    pub fn validation(msg: impl Into<String>) -> Self {
        Self::Validation(msg.into())
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Self::Io { path: path.into(), source }
    }

    /// Process exit code: 1 for validation failures, 2 for runtime failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Validation(_) => 1,
            _ => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
