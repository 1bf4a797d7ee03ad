use std::path::PathBuf;

use bdt_core::BdtError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad flag values or combinations.
    #[error("usage error: {0}")]
    Usage(String),

    #[error(transparent)]
    Core(#[from] BdtError),

    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },

    #[error("invalid model file: {0}")]
    Model(String),

    #[error("invalid diagram: {0}")]
    Diagram(String),

    #[error("fold {index} failed: {source}")]
    Fold { index: usize, source: Box<CliError> },
}

impl CliError {
    /// Process exit code: 2 for usage errors, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Core(BdtError::Config(_)) => 2,
            CliError::Fold { source, .. } => source.exit_code(),
            _ => 1,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> CliError {
        let path = path.into();
        move |source| CliError::Io { path, source }
    }
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;
