use std::path::PathBuf;

use serde_json::json;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("failing suites: {}", .0.join(", "))]
    Suite(Vec<String>),

    #[error("i/o error on {path}: {msg}")]
    Io { path: PathBuf, msg: String },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Suite(_) => 1,
            CliError::Config(_) => 2,
            CliError::Data(_) | CliError::Io { .. } => 3,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config",
            CliError::Data(_) => "data",
            CliError::Suite(_) => "suite",
            CliError::Io { .. } => "io",
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        let mut body = json!({"error": self.kind(), "exit_code": self.exit_code(), "message": self.to_string()});
        if let CliError::Suite(list) = self {
            body["failing"] = json!(list);
        }
        body
    }

    pub fn io(path: impl Into<PathBuf>, e: std::io::Error) -> Self {
        CliError::Io { path: path.into(), msg: e.to_string() }
    }
}

/// Core errors raised while building inputs are configuration errors; the
/// rest are data errors.
pub fn config_err(e: flatlab_core::Error) -> CliError {
    CliError::Config(e.to_string())
}

pub fn data_err(e: flatlab_core::Error) -> CliError {
    CliError::Data(e.to_string())
}

pub type CliResult<T> = std::result::Result<T, CliError>;
