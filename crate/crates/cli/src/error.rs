use std::path::Path;

use dyadic_core::Error as CoreError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Io(String),
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] CoreError),
    #[error("missing dependency: {0}")]
    Dependency(String),
    #[error("property failure: {0}")]
    Property(String),
}

impl CliError {
    pub fn io(path: &Path, err: std::io::Error) -> Self {
        CliError::Io(format!("{}: {err}", path.display()))
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Io(_) => 1,
            CliError::Config(_) => 2,
            CliError::Core(e) => match e {
                CoreError::Config(_)
                | CoreError::Dimension(_)
                | CoreError::Precondition(_)
                | CoreError::InvalidDiscretization(_) => 2,
                CoreError::Divergence { .. }
                | CoreError::StepSize { .. }
                | CoreError::InvariantViolation { .. }
                | CoreError::NonlinearityEvaluation { .. } => 4,
                CoreError::PropertyFailure(_) => 5,
                _ => 3,
            },
            CliError::Property(_) => 5,
            CliError::Dependency(_) => 6,
        }
    }
}
