//! Trial orchestration and aggregation.
//!
//! Trials are split into fixed-size shards. Each shard is tallied on its own
//! and the tallies are merged in shard order, so every output (including the
//! floating-point means) is bit-identical for any worker count.

use std::fmt;
use std::str::FromStr;
use std::sync::atomic::{AtomicU64, Ordering};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chsh::{build_probability_table, select_violation, FormSet, SelectionPolicy};
use crate::error::{ConfigError, ExperimentError, TrialError};
use crate::quantum::{NoisyState, PureTwoQubitState};
use crate::sampling::{
    sample_direction, sample_orthogonal_pair, sample_orthogonal_triad, RandomSource,
};
use crate::stats::{median, wilson_interval, Z_95};

/// Trials per aggregation shard.
pub const SHARD_SIZE: u64 = 4096;

/// Histogram range for required efficiencies.
pub const HISTOGRAM_RANGE: (f64, f64) = (0.6, 1.0);

/// Efficiencies at which the summary reports `P_viol` explicitly.
pub const NAMED_ETAS: [f64; 4] = [0.785, 0.828, 0.9, 1.0];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scenario {
    /// Random isotropic measurements: every axis independent and uniform.
    Rim,
    /// Random orthogonal measurements: second axis uniform on the circle
    /// perpendicular to the first.
    Rom,
    /// Random orthogonal triads: three settings per party from a Haar rotation.
    Rotm,
}

impl Scenario {
    pub fn settings_per_party(&self) -> usize {
        match self {
            Scenario::Rim | Scenario::Rom => 2,
            Scenario::Rotm => 3,
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scenario::Rim => "rim",
            Scenario::Rom => "rom",
            Scenario::Rotm => "rotm",
        })
    }
}

impl FromStr for Scenario {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "rim" => Ok(Scenario::Rim),
            "rom" => Ok(Scenario::Rom),
            "rotm" => Ok(Scenario::Rotm),
            other => Err(ConfigError::Invalid(format!(
                "unknown scenario '{other}' (expected rim, rom or rotm)"
            ))),
        }
    }
}

/// `start:stop:step` grid of detection efficiencies.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EtaGrid {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl Default for EtaGrid {
    fn default() -> Self {
        Self {
            start: 0.6,
            stop: 1.0,
            step: 0.001,
        }
    }
}

impl EtaGrid {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let ok = self.start.is_finite()
            && self.stop.is_finite()
            && self.step.is_finite()
            && self.start >= 0.6
            && self.stop <= 1.0
            && self.step > 0.0
            && self.start <= self.stop;
        if !ok {
            return Err(ConfigError::Invalid(format!(
                "eta grid {self} must satisfy 0.6 <= start <= stop <= 1.0 and step > 0"
            )));
        }
        Ok(())
    }

    /// Grid points, snapped to 12 decimals so that e.g. 0.785 is the nearest
    /// double to 0.785 rather than an accumulated sum.
    pub fn points(&self) -> Vec<f64> {
        let n = ((self.stop - self.start) / self.step + 1e-9).floor() as usize;
        (0..=n)
            .map(|i| ((self.start + i as f64 * self.step) * 1e12).round() / 1e12)
            .collect()
    }
}

impl fmt::Display for EtaGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.start, self.stop, self.step)
    }
}

impl FromStr for EtaGrid {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<&str> = s.split(':').collect();
        let bad = || ConfigError::Invalid(format!("eta grid '{s}' is not START:STOP:STEP"));
        if parts.len() != 3 {
            return Err(bad());
        }
        let num = |p: &str| p.trim().parse::<f64>().map_err(|_| bad());
        let grid = Self {
            start: num(parts[0])?,
            stop: num(parts[1])?,
            step: num(parts[2])?,
        };
        grid.validate()?;
        Ok(grid)
    }
}

/// Everything needed to reproduce one experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub scenario: Scenario,
    /// `α/β` of the shared state `α|01⟩ + β|10⟩`.
    pub alpha_ratio: f64,
    pub visibility: f64,
    pub trials: u64,
    pub master_seed: u64,
    pub histogram_bins: usize,
    pub eta_grid: EtaGrid,
    pub selection_policy: SelectionPolicy,
    pub workers: usize,
}

impl ScenarioConfig {
    pub const DEFAULT_TRIALS: u64 = 4_000_000;
    pub const QUICK_TRIALS: u64 = 100_000;

    pub fn new(scenario: Scenario) -> Self {
        Self {
            scenario,
            alpha_ratio: 1.0,
            visibility: 1.0,
            trials: Self::DEFAULT_TRIALS,
            master_seed: 0,
            histogram_bins: 200,
            eta_grid: EtaGrid::default(),
            selection_policy: SelectionPolicy::MaxI,
            workers: std::thread::available_parallelism().map_or(1, |n| n.get()),
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |msg: String| Err(ConfigError::Invalid(msg));
        if !(self.alpha_ratio.is_finite() && self.alpha_ratio > 0.0) {
            return invalid(format!("alpha ratio must be positive, got {}", self.alpha_ratio));
        }
        if !(0.0..=1.0).contains(&self.visibility) {
            return invalid(format!("visibility must lie in [0, 1], got {}", self.visibility));
        }
        if self.trials == 0 {
            return invalid("trials must be positive".into());
        }
        if self.histogram_bins == 0 {
            return invalid("histogram bins must be positive".into());
        }
        if self.workers == 0 {
            return invalid("workers must be positive".into());
        }
        self.eta_grid.validate()
    }

    pub fn state(&self) -> Result<NoisyState, ConfigError> {
        let invalid = |e: crate::error::QuantumError| ConfigError::Invalid(e.to_string());
        let pure = PureTwoQubitState::from_ratio(self.alpha_ratio).map_err(invalid)?;
        NoisyState::new(pure, self.visibility).map_err(invalid)
    }
}

/// Result of one simulated Bell test.
///
/// `violated` holds iff `i_max` exceeds [`crate::TOL`], and exactly then
/// `eta_req` is present.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrialOutcome {
    pub trial_index: u64,
    pub i_max: f64,
    pub violated: bool,
    pub eta_req: Option<f64>,
}

/// A validated configuration with its state and form set prepared once.
#[derive(Debug, Clone)]
pub struct Experiment {
    config: ScenarioConfig,
    state: NoisyState,
    forms: FormSet,
}

impl Experiment {
    pub fn new(config: ScenarioConfig) -> Result<Self, ConfigError> {
        config.validate()?;
        let state = config.state()?;
        let forms = FormSet::new(config.scenario.settings_per_party())
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        Ok(Self {
            config,
            state,
            forms,
        })
    }

    pub fn config(&self) -> &ScenarioConfig {
        &self.config
    }

    /// Samples the settings of trial `trial_index` and scores them.
    ///
    /// Draw order from the trial's stream: Alice's settings, Bob's settings,
    /// then one uniform that picks among exactly tied forms.
    pub fn run_trial(&self, trial_index: u64) -> Result<TrialOutcome, TrialError> {
        let fail = |source| TrialError {
            trial_index,
            source,
        };
        let mut rng = RandomSource::new(self.config.master_seed, trial_index);
        let policy = self.config.selection_policy;
        let (best, by_policy) = match self.config.scenario {
            Scenario::Rim | Scenario::Rom => {
                let draw_pair = |rng: &mut RandomSource| match self.config.scenario {
                    Scenario::Rim => [sample_direction(rng), sample_direction(rng)],
                    _ => {
                        let (d1, d2) = sample_orthogonal_pair(rng);
                        [d1, d2]
                    }
                };
                let a = draw_pair(&mut rng);
                let b = draw_pair(&mut rng);
                let table = build_probability_table(&self.state, &a, &b).map_err(fail)?;
                let draw = rng.uniform();
                self.score(&table, policy, draw).map_err(fail)?
            }
            Scenario::Rotm => {
                let a = sample_orthogonal_triad(&mut rng).axes();
                let b = sample_orthogonal_triad(&mut rng).axes();
                let table = build_probability_table(&self.state, &a, &b).map_err(fail)?;
                let draw = rng.uniform();
                self.score(&table, policy, draw).map_err(fail)?
            }
        };
        Ok(TrialOutcome {
            trial_index,
            i_max: best,
            violated: by_policy.is_some(),
            eta_req: by_policy,
        })
    }

    fn score<const S: usize>(
        &self,
        table: &crate::chsh::ProbabilityTable<S>,
        policy: SelectionPolicy,
        draw: f64,
    ) -> Result<(f64, Option<f64>), crate::error::ChshError> {
        let by_value = select_violation(table, &self.forms, SelectionPolicy::MaxI, draw)?;
        let eta = match policy {
            SelectionPolicy::MaxI => by_value.eta_req,
            SelectionPolicy::MinEta => {
                select_violation(table, &self.forms, SelectionPolicy::MinEta, draw)?.eta_req
            }
        };
        Ok((by_value.i_value, eta))
    }
}

/// Outcome of trial `trial_index` under `config`.
pub fn run_trial(config: &ScenarioConfig, trial_index: u64) -> Result<TrialOutcome, ExperimentError> {
    let experiment = Experiment::new(config.clone())?;
    experiment
        .run_trial(trial_index)
        .map_err(|source| ExperimentError::Trial {
            source,
            completed_trials: 0,
        })
}

/// Counts of violating trials per required-efficiency bin over `[0.6, 1.0]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EfficiencyHistogram {
    pub bin_edges: Vec<f64>,
    pub counts: Vec<u64>,
    pub total_trials: u64,
    pub violating_trials: u64,
}

impl EfficiencyHistogram {
    fn empty(bins: usize) -> Self {
        let (lo, hi) = HISTOGRAM_RANGE;
        let width = (hi - lo) / bins as f64;
        let mut bin_edges: Vec<f64> = (0..=bins).map(|i| lo + i as f64 * width).collect();
        bin_edges[bins] = hi;
        Self {
            bin_edges,
            counts: vec![0; bins],
            total_trials: 0,
            violating_trials: 0,
        }
    }

    fn bin_of(&self, eta: f64) -> usize {
        let (lo, hi) = HISTOGRAM_RANGE;
        let bins = self.counts.len();
        let raw = ((eta - lo) / (hi - lo) * bins as f64).floor();
        (raw.max(0.0) as usize).min(bins - 1)
    }
}

/// `P_viol(η)`: fraction of all trials whose required efficiency is at most η.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViolationCurve {
    pub etas: Vec<f64>,
    /// Number of trials with `eta_req ≤ etas[i]`.
    pub violating: Vec<u64>,
    pub p_viol: Vec<f64>,
    pub ci_low: Vec<f64>,
    pub ci_high: Vec<f64>,
}

impl ViolationCurve {
    /// `P_viol` at the grid point closest to `eta`.
    pub fn at(&self, eta: f64) -> Option<f64> {
        let idx = self
            .etas
            .iter()
            .enumerate()
            .min_by(|a, b| (a.1 - eta).abs().total_cmp(&(b.1 - eta).abs()))?
            .0;
        Some(self.p_viol[idx])
    }
}

/// `P_viol` at one efficiency, counted from exact per-trial values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NamedPoint {
    pub eta: f64,
    pub violating: u64,
    pub p_viol: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub trials: u64,
    pub violating_trials: u64,
    pub p_viol_at_one: f64,
    pub p_viol_at_one_ci: (f64, f64),
    pub named_points: Vec<NamedPoint>,
    pub min_eta_req: Option<f64>,
    pub mean_i_max_violating: Option<f64>,
    pub median_i_max_violating: Option<f64>,
    pub max_i_max: f64,
}

impl Summary {
    pub fn p_viol_at(&self, eta: f64) -> Option<f64> {
        self.named_points
            .iter()
            .find(|p| (p.eta - eta).abs() < 1e-12)
            .map(|p| p.p_viol)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub config: ScenarioConfig,
    pub histogram: EfficiencyHistogram,
    pub curve: ViolationCurve,
    pub summary: Summary,
}

/// Per-shard integer tallies plus the raw values needed for order statistics.
struct ShardTally {
    trials: u64,
    histogram: Vec<u64>,
    grid_hits: Vec<u64>,
    named_hits: [u64; NAMED_ETAS.len()],
    violating_i: Vec<f64>,
    min_eta: f64,
    max_i: f64,
}

fn run_shard(
    experiment: &Experiment,
    template: &EfficiencyHistogram,
    grid: &[f64],
    range: std::ops::Range<u64>,
) -> Result<ShardTally, TrialError> {
    let mut tally = ShardTally {
        trials: range.end - range.start,
        histogram: vec![0; template.counts.len()],
        grid_hits: vec![0; grid.len()],
        named_hits: [0; NAMED_ETAS.len()],
        violating_i: Vec::new(),
        min_eta: f64::INFINITY,
        max_i: f64::NEG_INFINITY,
    };
    for idx in range {
        let outcome = experiment.run_trial(idx)?;
        tally.max_i = tally.max_i.max(outcome.i_max);
        let Some(eta) = outcome.eta_req else {
            continue;
        };
        tally.violating_i.push(outcome.i_max);
        tally.min_eta = tally.min_eta.min(eta);
        tally.histogram[template.bin_of(eta)] += 1;
        let first = grid.partition_point(|&g| g < eta);
        if first < grid.len() {
            tally.grid_hits[first] += 1;
        }
        for (hits, &named) in tally.named_hits.iter_mut().zip(&NAMED_ETAS) {
            if eta <= named {
                *hits += 1;
            }
        }
    }
    Ok(tally)
}

/// Runs trials `0..config.trials` and aggregates them.
pub fn run_experiment(config: &ScenarioConfig) -> Result<ExperimentResult, ExperimentError> {
    run_experiment_with_progress(config, |_| {})
}

/// As [`run_experiment`], calling `progress` with the number of completed
/// trials after every shard (from worker threads, in no particular order).
pub fn run_experiment_with_progress<F>(
    config: &ScenarioConfig,
    progress: F,
) -> Result<ExperimentResult, ExperimentError>
where
    F: Fn(u64) + Sync,
{
    let experiment = Experiment::new(config.clone())?;
    let grid = config.eta_grid.points();
    let template = EfficiencyHistogram::empty(config.histogram_bins);
    let shards = config.trials.div_ceil(SHARD_SIZE);
    let done = AtomicU64::new(0);

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers)
        .build()
        .map_err(|e| ExperimentError::Config(ConfigError::Invalid(e.to_string())))?;
    let tallies: Vec<Result<ShardTally, TrialError>> = pool.install(|| {
        (0..shards)
            .into_par_iter()
            .map(|shard| {
                let start = shard * SHARD_SIZE;
                let end = (start + SHARD_SIZE).min(config.trials);
                let tally = run_shard(&experiment, &template, &grid, start..end);
                if tally.is_ok() {
                    progress(done.fetch_add(end - start, Ordering::Relaxed) + end - start);
                }
                tally
            })
            .collect()
    });

    let mut histogram = template;
    let mut grid_hits = vec![0u64; grid.len()];
    let mut named_hits = [0u64; NAMED_ETAS.len()];
    let mut violating_i = Vec::new();
    let mut min_eta = f64::INFINITY;
    let mut max_i = f64::NEG_INFINITY;
    let mut completed = 0u64;
    for tally in tallies {
        let tally = tally.map_err(|source| ExperimentError::Trial {
            source,
            completed_trials: completed,
        })?;
        completed += tally.trials;
        for (dst, src) in histogram.counts.iter_mut().zip(&tally.histogram) {
            *dst += src;
        }
        for (dst, src) in grid_hits.iter_mut().zip(&tally.grid_hits) {
            *dst += src;
        }
        for (dst, src) in named_hits.iter_mut().zip(&tally.named_hits) {
            *dst += src;
        }
        violating_i.extend_from_slice(&tally.violating_i);
        min_eta = min_eta.min(tally.min_eta);
        max_i = max_i.max(tally.max_i);
    }

    let total = config.trials;
    let violating = violating_i.len() as u64;
    histogram.total_trials = total;
    histogram.violating_trials = violating;

    let mut cumulative = 0u64;
    let mut curve = ViolationCurve {
        etas: grid,
        violating: Vec::with_capacity(grid_hits.len()),
        p_viol: Vec::with_capacity(grid_hits.len()),
        ci_low: Vec::with_capacity(grid_hits.len()),
        ci_high: Vec::with_capacity(grid_hits.len()),
    };
    for hits in grid_hits {
        cumulative += hits;
        let (lo, hi) = wilson_interval(cumulative, total, Z_95);
        curve.violating.push(cumulative);
        curve.p_viol.push(cumulative as f64 / total as f64);
        curve.ci_low.push(lo);
        curve.ci_high.push(hi);
    }

    let named_points = NAMED_ETAS
        .iter()
        .zip(named_hits)
        .map(|(&eta, hits)| {
            let (ci_low, ci_high) = wilson_interval(hits, total, Z_95);
            NamedPoint {
                eta,
                violating: hits,
                p_viol: hits as f64 / total as f64,
                ci_low,
                ci_high,
            }
        })
        .collect();
    let mean_i = (!violating_i.is_empty())
        .then(|| violating_i.iter().sum::<f64>() / violating_i.len() as f64);
    let summary = Summary {
        trials: total,
        violating_trials: violating,
        p_viol_at_one: violating as f64 / total as f64,
        p_viol_at_one_ci: wilson_interval(violating, total, Z_95),
        named_points,
        min_eta_req: min_eta.is_finite().then_some(min_eta),
        mean_i_max_violating: mean_i,
        median_i_max_violating: median(&mut violating_i),
        max_i_max: max_i,
    };
    Ok(ExperimentResult {
        config: config.clone(),
        histogram,
        curve,
        summary,
    })
}

/// Runs each configuration with its master seed offset by its position in
/// the list. Invalid configurations yield an error in their slot; the rest
/// still run.
pub fn sweep(
    configs: &[ScenarioConfig],
) -> Result<Vec<Result<ExperimentResult, ExperimentError>>, ExperimentError> {
    sweep_with_progress(configs, |_, _| {})
}

/// As [`sweep`], reporting `(config ordinal, completed trials)`.
pub fn sweep_with_progress<F>(
    configs: &[ScenarioConfig],
    progress: F,
) -> Result<Vec<Result<ExperimentResult, ExperimentError>>, ExperimentError>
where
    F: Fn(usize, u64) + Sync,
{
    if configs.iter().all(|c| c.validate().is_err()) {
        return Err(ExperimentError::EmptySweep);
    }
    Ok(configs
        .iter()
        .enumerate()
        .map(|(ordinal, config)| {
            let mut config = config.clone();
            config.master_seed = config.master_seed.wrapping_add(ordinal as u64);
            run_experiment_with_progress(&config, |done| progress(ordinal, done))
        })
        .collect())
}
