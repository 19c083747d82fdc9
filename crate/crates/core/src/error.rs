use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum QuantumError {
    #[error("invalid measurement direction: norm {norm} is not 1")]
    InvalidDirection { norm: f64 },
    #[error("matrix is not a rank-1 projector (residual {residual:e})")]
    InvalidProjector { residual: f64 },
    #[error("invalid state: {0}")]
    InvalidState(String),
    #[error("probability has imaginary residue {0:e}")]
    ImaginaryResidue(f64),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SamplingError {
    #[error("angle parameter {name}={value} outside [0, 1]")]
    Domain { name: &'static str, value: f64 },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ChshError {
    #[error("unsupported settings per party: {0} (expected 2 or 3)")]
    UnsupportedSettings(usize),
    #[error("form selects setting {setting} but the table has only {available}")]
    SettingOutOfRange { setting: usize, available: usize },
    #[error("no violation: I = {i_value:e}, required efficiency is undefined")]
    NoViolation { i_value: f64 },
    #[error("detection efficiency {0} outside [0, 1]")]
    EfficiencyDomain(f64),
    #[error("probability table inconsistent: {0}")]
    Inconsistent(String),
    #[error(transparent)]
    Quantum(#[from] QuantumError),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

/// A trial failed; carries the index so the run can be reproduced.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("trial {trial_index} failed: {source}")]
pub struct TrialError {
    pub trial_index: u64,
    #[source]
    pub source: ChshError,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    /// Aborted after a trial failure; `completed_trials` counts shards that
    /// finished before the failing one.
    #[error("{source} (partial results: {completed_trials} trials completed)")]
    Trial {
        #[source]
        source: TrialError,
        completed_trials: u64,
    },
    #[error("sweep needs at least one valid configuration")]
    EmptySweep,
}
