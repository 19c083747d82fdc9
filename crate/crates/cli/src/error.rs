use thiserror::Error;

use bellsim_core::{ChshError, ConfigError, ExperimentError, TrialError};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("I/O failure: {0}")]
    Io(#[from] std::io::Error),
    #[error("{0} check(s) failed")]
    ChecksFailed(usize),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Numerical(_) | CliError::ChecksFailed(_) => 2,
            CliError::Io(_) => 3,
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Usage(e.to_string())
    }
}

impl From<ChshError> for CliError {
    fn from(e: ChshError) -> Self {
        CliError::Numerical(e.to_string())
    }
}

impl From<TrialError> for CliError {
    fn from(e: TrialError) -> Self {
        CliError::Numerical(e.to_string())
    }
}

impl From<ExperimentError> for CliError {
    fn from(e: ExperimentError) -> Self {
        match e {
            ExperimentError::Config(c) => c.into(),
            ExperimentError::EmptySweep => CliError::Usage(e.to_string()),
            ExperimentError::Trial { .. } => CliError::Numerical(e.to_string()),
        }
    }
}
