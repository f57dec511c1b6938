use std::path::PathBuf;

/// Exit code for a malformed command line or an unreadable input file.
pub const EXIT_USAGE: i32 = 1;
/// Exit code for a schema violation, a failed check or a numerical failure.
pub const EXIT_VALIDATION: i32 = 2;

#[derive(Debug, thiserror::Error)]
pub enum AppError {
    #[error("{0}")]
    Usage(String),
    #[error("cannot access {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("invalid config: {0}")]
    Config(String),
    #[error("malformed {what} in {path}: {detail}")]
    Format { what: &'static str, path: PathBuf, detail: String },
    #[error(transparent)]
    Core(#[from] photonsort_core::Error),
    #[error("validation failed: {0}")]
    Validation(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl AppError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        AppError::Io { path: path.into(), source }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            AppError::Usage(_) | AppError::Io { .. } => EXIT_USAGE,
            _ => EXIT_VALIDATION,
        }
    }
}

pub type AppResult<T> = Result<T, AppError>;
