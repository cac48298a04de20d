use std::path::PathBuf;

use hnls_core::LabError;
use thiserror::Error;

/// Exit status for a failed acceptance check or an integrity failure.
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_SCHEMA: i32 = 2;
pub const EXIT_RESOURCE: i32 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("schema error: {0}")]
    Schema(String),
    #[error("resource cap exceeded: {0}")]
    ResourceCap(String),
    #[error("integrity error: {0}")]
    Integrity(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Lab(#[from] LabError),
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Schema(_) => EXIT_SCHEMA,
            CliError::ResourceCap(_) => EXIT_RESOURCE,
            CliError::Lab(e) => match e {
                LabError::ResourceCap(_) => EXIT_RESOURCE,
                LabError::InvalidSignature(_)
                | LabError::InvalidParameter(_)
                | LabError::DimensionMismatch { .. }
                | LabError::ExponentBelowTwo(_)
                | LabError::NonIntegerCenter
                | LabError::InsufficientPoints(_)
                | LabError::TooFewNodes(_)
                | LabError::ExactUnavailable(_) => EXIT_SCHEMA,
                _ => EXIT_FAILURE,
            },
            _ => EXIT_FAILURE,
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
