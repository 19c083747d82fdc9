//! Oracle checks behind `bellsim verify`.

use bellsim_core::chsh::select_violation;
use bellsim_core::stats::ks_uniform;
use bellsim_core::{
    build_probability_table, efficiency_corrected_value, enumerate_forms, lhv_brute_force_bound,
    sample_direction, sample_orthogonal_pair, sample_orthogonal_triad, Experiment, FormSet,
    NoisyState, PureTwoQubitState, RandomSource, Scenario, ScenarioConfig, SelectionPolicy,
    TSIRELSON_CH,
};

use crate::error::CliError;

/// KS distance allowed between sampled `n_z` and the uniform law on [−1, 1].
pub const KS_LIMIT: f64 = 0.005;
pub const THRESHOLD_OFFSET: f64 = 1e-6;

#[derive(Debug, Clone)]
pub struct Check {
    pub name: String,
    pub detail: String,
    pub passed: bool,
}

impl std::fmt::Display for Check {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let verdict = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "{}: {} {verdict}", self.name, self.detail)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct VerifyOptions {
    pub settings: usize,
    pub samples: u64,
    pub seed: u64,
}

pub fn run_checks(opts: &VerifyOptions) -> Result<Vec<Check>, CliError> {
    let mut checks = vec![lhv_check(opts.settings)?];
    if opts.settings == 3 {
        checks.push(lhv_per_form_check()?);
    }
    checks.push(tsirelson_check(opts.samples, opts.seed)?);
    checks.extend(uniformity_checks(opts.samples, opts.seed));
    checks.push(threshold_check(opts.samples.min(100_000), opts.seed)?);
    Ok(checks)
}

fn lhv_check(settings: usize) -> Result<Check, CliError> {
    let forms = enumerate_forms(settings)?;
    let bound = lhv_brute_force_bound(settings, &forms)?;
    Ok(Check {
        name: format!("LHV bound ({settings} settings)"),
        detail: format!("max I = {bound:.6e}"),
        passed: bound.abs() <= 1e-12,
    })
}

fn lhv_per_form_check() -> Result<Check, CliError> {
    let forms = enumerate_forms(3)?;
    let mut worst: f64 = 0.0;
    for form in &forms {
        worst = worst.max(lhv_brute_force_bound(3, std::slice::from_ref(form))?.abs());
    }
    Ok(Check {
        name: format!("LHV bound per form ({} forms, 64 strategies)", forms.len()),
        detail: format!("max |I| = {worst:.6e}"),
        passed: forms.len() == 72 && worst <= 1e-12,
    })
}

/// Largest CH value over `samples` trials spread across every scenario and
/// three states.
fn tsirelson_check(samples: u64, seed: u64) -> Result<Check, CliError> {
    let mut best = f64::NEG_INFINITY;
    let per_run = (samples / 9).max(1);
    for scenario in [Scenario::Rim, Scenario::Rom, Scenario::Rotm] {
        for ratio in [0.5, 0.75, 1.0] {
            let experiment = Experiment::new(ScenarioConfig {
                alpha_ratio: ratio,
                trials: per_run,
                master_seed: seed,
                workers: 1,
                ..ScenarioConfig::new(scenario)
            })?;
            for idx in 0..per_run {
                best = best.max(experiment.run_trial(idx)?.i_max);
            }
        }
    }
    let limit = TSIRELSON_CH + 1e-9;
    Ok(Check {
        name: format!("Tsirelson cap over {} trials", per_run * 9),
        detail: format!("max I = {best:.7} <= {limit:.7}"),
        passed: best <= limit,
    })
}

fn uniformity_checks(samples: u64, seed: u64) -> Vec<Check> {
    type Sampler = fn(&mut RandomSource) -> f64;
    let samplers: [(&str, Sampler); 3] = [
        ("uniform direction", |rng| sample_direction(rng).components()[2]),
        ("orthogonal pair, second axis", |rng| {
            sample_orthogonal_pair(rng).1.components()[2]
        }),
        ("orthogonal triad, first axis", |rng| {
            sample_orthogonal_triad(rng).d1.components()[2]
        }),
    ];
    samplers
        .iter()
        .map(|(name, draw)| {
            let mut nz: Vec<f64> = (0..samples)
                .map(|i| draw(&mut RandomSource::new(seed, i)))
                .collect();
            let ks = ks_uniform(&mut nz, -1.0, 1.0);
            Check {
                name: format!("KS uniformity of n_z ({name}, {samples} draws)"),
                detail: format!("D = {ks:.6} <= {KS_LIMIT}"),
                passed: ks <= KS_LIMIT,
            }
        })
        .collect()
}

/// The efficiency-corrected value changes sign at each trial's `eta_req`.
fn threshold_check(samples: u64, seed: u64) -> Result<Check, CliError> {
    let forms = FormSet::new(2)?;
    let mut violating = 0u64;
    let mut failures = 0u64;
    for ratio in [0.5, 1.0] {
        let state = NoisyState::pure(PureTwoQubitState::from_ratio(ratio).map_err(bellsim_core::ChshError::from)?);
        for idx in 0..samples / 2 {
            let mut rng = RandomSource::new(seed, idx);
            let a = [sample_direction(&mut rng), sample_direction(&mut rng)];
            let b = [sample_direction(&mut rng), sample_direction(&mut rng)];
            let table = build_probability_table(&state, &a, &b)?;
            let record = select_violation(&table, &forms, SelectionPolicy::MaxI, rng.uniform())?;
            let Some(eta) = record.eta_req else { continue };
            violating += 1;
            let above = efficiency_corrected_value(&table, &record.form, (eta + THRESHOLD_OFFSET).min(1.0))?;
            let below = efficiency_corrected_value(&table, &record.form, eta - THRESHOLD_OFFSET)?;
            if !(above > 0.0 && below < 0.0) {
                failures += 1;
            }
        }
    }
    Ok(Check {
        name: format!("Threshold sign flip at eta_req +/- {THRESHOLD_OFFSET:e}"),
        detail: format!("{failures} failures in {violating} violating trials"),
        passed: failures == 0 && violating > 0,
    })
}
