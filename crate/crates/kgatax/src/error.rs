use std::io;
use std::path::PathBuf;

use thiserror::Error;

use crate::persist::ModelFileError;

pub type Result<T, E = AppError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum AppError {
    #[error("{}:{line}: {msg}", path.display())]
    Parse { path: PathBuf, line: usize, msg: String },
    #[error("config error: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("model file: {0}")]
    Model(#[from] ModelFileError),
    #[error(transparent)]
    Core(#[from] kgatax_core::Error),
    #[error("{context}: {source}")]
    Io { context: String, source: io::Error },
    #[error("gradient check failed: {0}")]
    GradCheck(String),
}

/// Process exit codes.
pub mod exit {
    pub const OK: i32 = 0;
    pub const CONFIG: i32 = 2;
    pub const DATA: i32 = 3;
    pub const DIVERGED: i32 = 4;
    pub const GRADCHECK: i32 = 5;
}

impl AppError {
    pub fn exit_code(&self) -> i32 {
        use kgatax_core::Error as E;
        match self {
            AppError::Config(_) => exit::CONFIG,
            AppError::GradCheck(_) => exit::GRADCHECK,
            AppError::Core(E::Config { .. }) => exit::CONFIG,
            AppError::Core(E::Diverged { .. } | E::NonFinite(_)) => exit::DIVERGED,
            AppError::Parse { .. }
            | AppError::Data(_)
            | AppError::Model(_)
            | AppError::Core(_)
            | AppError::Io { .. } => exit::DATA,
        }
    }

    pub(crate) fn io(context: impl Into<String>) -> impl FnOnce(io::Error) -> AppError {
        let context = context.into();
        move |source| AppError::Io { context, source }
    }
}
