//! Monte Carlo estimation of CHSH violation probabilities when each party
//! picks its measurement axes at random, under finite detection efficiency.
//!
//! The crate is layered bottom-up:
//!
//! - [`quantum`]: two-qubit states, projectors, outcome probabilities
//! - [`sampling`]: seedable random measurement directions (RIM, ROM, ROTM)
//! - [`chsh`]: the CH functional, its relabelings, required efficiency
//! - [`montecarlo`]: trial orchestration, histograms and violation curves

#![allow(clippy::needless_range_loop)]

pub mod chsh;
pub mod error;
pub mod montecarlo;
pub mod quantum;
pub mod sampling;
pub mod stats;

/// Absolute tolerance used for every numerical invariant check.
pub const TOL: f64 = 1e-12;

/// Quantum maximum of the CH functional, `1/√2 − 1/2`.
pub const TSIRELSON_CH: f64 = std::f64::consts::FRAC_1_SQRT_2 - 0.5;

pub use chsh::{
    build_probability_table, ch_value, efficiency_corrected_value, enumerate_forms, eta_req,
    lhv_brute_force_bound, max_violation, ChForm, FormSet, ProbabilityTable, SelectionPolicy,
    ViolationRecord,
};
pub use error::{ChshError, ConfigError, ExperimentError, QuantumError, SamplingError, TrialError};
pub use montecarlo::{
    run_experiment, run_trial, sweep, EfficiencyHistogram, EtaGrid, Experiment, ExperimentResult,
    Scenario, ScenarioConfig, Summary, TrialOutcome, ViolationCurve,
};
pub use quantum::{
    joint_probability, marginal_probability, MeasurementDirection, NoisyState, Party, Projector,
    PureTwoQubitState,
};
pub use sampling::{
    direction_from_angles, sample_direction, sample_orthogonal_pair, sample_orthogonal_triad,
    MeasurementTriad, RandomSource,
};
