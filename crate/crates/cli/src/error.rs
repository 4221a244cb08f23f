use std::path::{Path, PathBuf};

use serde::Serialize;
use thiserror::Error;

/// Any failure after argument parsing. All of these exit with status 1.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("file not found: {}", .0.display())]
    NotFound(PathBuf),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{context}: {message}")]
    Data { context: String, message: String },
    #[error("{0}")]
    Invalid(String),
}

impl CliError {
    pub fn kind(&self) -> &'static str {
        match self {
            CliError::NotFound(_) => "not_found",
            CliError::Io { .. } => "io",
            CliError::Data { .. } => "data",
            CliError::Invalid(_) => "invalid_input",
        }
    }

    pub fn data(context: impl Into<String>, err: impl std::fmt::Display) -> Self {
        CliError::Data {
            context: context.into(),
            message: err.to_string(),
        }
    }

    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_owned(),
            source,
        }
    }
}

#[derive(Serialize)]
struct ErrorBody<'a> {
    kind: &'a str,
    message: String,
    exit_code: u8,
}

#[derive(Serialize)]
struct ErrorJson<'a> {
    error: ErrorBody<'a>,
}

/// The machine-readable error object printed with `--json-errors`.
pub fn error_json(kind: &str, message: String, exit_code: u8) -> String {
    serde_json::to_string(&ErrorJson {
        error: ErrorBody {
            kind,
            message,
            exit_code,
        },
    })
    .expect("plain data serializes")
}

pub fn require_file(path: &Path) -> Result<(), CliError> {
    if path.is_file() {
        Ok(())
    } else {
        Err(CliError::NotFound(path.to_owned()))
    }
}
