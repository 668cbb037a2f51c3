use std::path::Path;
use thiserror::Error;
use zerolab::{AnalysisError, DataError, InitError, NetError, PruneError};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("training diverged at step {step}")]
    Diverged { step: usize },
    #[error("I/O error on {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("bad input data: {0}")]
    Data(#[from] DataError),
    #[error("bad input: {0}")]
    BadInput(String),
    #[error("{0}")]
    Other(String),
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io { path: path.display().to_string(), source }
    }

    /// Process exit code: 2 config, 3 divergence, 4 I/O or data, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Diverged { .. } => 3,
            CliError::Io { .. } | CliError::Data(_) | CliError::BadInput(_) => 4,
            CliError::Other(_) => 1,
        }
    }
}

impl From<NetError> for CliError {
    fn from(e: NetError) -> Self {
        match e {
            NetError::InvalidSpec(_) | NetError::InvalidConfig(_) | NetError::DimensionMismatch { .. } | NetError::Init(_) => {
                CliError::Config(e.to_string())
            }
            NetError::Diverged { step, .. } => CliError::Diverged { step },
            other => CliError::Other(other.to_string()),
        }
    }
}

impl From<InitError> for CliError {
    fn from(e: InitError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<PruneError> for CliError {
    fn from(e: PruneError) -> Self {
        match e {
            PruneError::Net(n) => n.into(),
            // Accuracy needs classification data; regression targets are a
            // configuration mistake.
            PruneError::InvalidFraction(_) | PruneError::NotOneHot { .. } => CliError::Config(e.to_string()),
        }
    }
}

impl From<AnalysisError> for CliError {
    fn from(e: AnalysisError) -> Self {
        match e {
            AnalysisError::Net(n) => n.into(),
            other => CliError::Other(other.to_string()),
        }
    }
}
