use std::path::Path;

use mosaic_core::{DataError, MemoryError, ModelError, PipelineError, TrainError};
use thiserror::Error;

use crate::config::ConfigError;

/// Errors surfaced to the shell. The exit code is part of the interface:
/// 2 bad input, 3 numeric failure, 4 empty filter, 1 anything else.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    Numeric(String),
    #[error("no user survived the memory filter; report written to {0}")]
    EmptyFilter(String),
    #[error("{0}")]
    Other(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 2,
            CliError::Numeric(_) => 3,
            CliError::EmptyFilter(_) => 4,
            CliError::Other(_) => 1,
        }
    }

    pub fn io(path: &Path, e: std::io::Error) -> Self {
        CliError::Other(format!("{}: {e}", path.display()))
    }

    pub fn read(path: &Path, e: impl std::fmt::Display) -> Self {
        CliError::Input(format!("{}: {e}", path.display()))
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<DataError> for CliError {
    fn from(e: DataError) -> Self {
        match e {
            DataError::Io(e) => CliError::Other(e.to_string()),
            e => CliError::Input(e.to_string()),
        }
    }
}

impl From<TrainError> for CliError {
    fn from(e: TrainError) -> Self {
        match e {
            TrainError::NonFiniteUpdate { .. } | TrainError::NonFiniteSample { .. } => CliError::Numeric(e.to_string()),
            TrainError::Io(e) => CliError::Other(e.to_string()),
            e => CliError::Input(e.to_string()),
        }
    }
}

impl From<MemoryError> for CliError {
    fn from(e: MemoryError) -> Self {
        match e {
            MemoryError::NonFinite => CliError::Numeric(e.to_string()),
            MemoryError::Io(e) => CliError::Other(e.to_string()),
            e => CliError::Input(e.to_string()),
        }
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        match e {
            ModelError::NonFiniteUpdate => CliError::Numeric(e.to_string()),
            e => CliError::Input(e.to_string()),
        }
    }
}

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> Self {
        match e {
            PipelineError::Train(e) => e.into(),
            PipelineError::Memory(e) => e.into(),
            PipelineError::EmptyFilter(_) => CliError::EmptyFilter(String::new()),
        }
    }
}
