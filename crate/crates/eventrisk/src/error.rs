use std::path::PathBuf;

use thiserror::Error;

/// Failures of the command-line workflows. Each variant maps to one exit
/// code, listed in the README.
#[derive(Debug, Error)]
pub enum AppError {
    #[error("cannot read {}: {source}", path.display())]
    MissingInput {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{file}, line {line}{}: {message}", column.as_ref().map(|c| format!(", column `{c}`")).unwrap_or_default())]
    Parse {
        file: String,
        line: usize,
        column: Option<String>,
        message: String,
    },
    #[error("{file}: {message}")]
    InvalidData { file: String, message: String },
    #[error("configuration: {0}")]
    Config(String),
    #[error("inputs disagree: {0}")]
    Mismatch(String),
    #[error("sampler: {0}")]
    Sampler(#[source] eventrisk_core::Error),
    #[error("cannot write {}: {source}", path.display())]
    Output {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("invalid argument: {0}")]
    Numeric(String),
}

impl AppError {
    pub fn exit_code(&self) -> i32 {
        match self {
            AppError::MissingInput { .. } => 3,
            AppError::Parse { .. } | AppError::InvalidData { .. } => 4,
            AppError::Config(_) => 5,
            AppError::Mismatch(_) => 6,
            AppError::Sampler(_) => 7,
            AppError::Output { .. } => 8,
            AppError::Numeric(_) => 9,
        }
    }

    pub(crate) fn parse(file: &str, line: usize, column: Option<&str>, message: impl Into<String>) -> Self {
        AppError::Parse {
            file: file.to_string(),
            line,
            column: column.map(str::to_string),
            message: message.into(),
        }
    }

    pub(crate) fn data(file: &str, message: impl Into<String>) -> Self {
        AppError::InvalidData {
            file: file.to_string(),
            message: message.into(),
        }
    }
}

pub type AppResult<T> = Result<T, AppError>;
