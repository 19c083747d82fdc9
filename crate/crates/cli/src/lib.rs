//! `bellsim` command-line front end.

pub mod error;
pub mod output;
pub mod verify;

use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::time::Instant;

use bellsim_core::montecarlo::{run_experiment_with_progress, sweep_with_progress};
use bellsim_core::{EtaGrid, ExperimentResult, Scenario, ScenarioConfig, SelectionPolicy};
use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::error::CliError;
use crate::output::Format;
use crate::verify::{run_checks, VerifyOptions};

#[derive(Debug, Parser)]
#[command(name = "bellsim", version, about = "CHSH violation probability under random measurements and finite detection efficiency")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one scenario for one state and write histogram, curve and summary.
    Run(RunArgs),
    /// Run one scenario for several states.
    Sweep(SweepArgs),
    /// Run the oracle checks (LHV bound, Tsirelson cap, sampler uniformity,
    /// threshold consistency).
    Verify(VerifyArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ScenarioArg {
    Rim,
    Rom,
    Rotm,
}

impl From<ScenarioArg> for Scenario {
    fn from(s: ScenarioArg) -> Self {
        match s {
            ScenarioArg::Rim => Scenario::Rim,
            ScenarioArg::Rom => Scenario::Rom,
            ScenarioArg::Rotm => Scenario::Rotm,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SelectionArg {
    MaxI,
    MinEta,
}

impl From<SelectionArg> for SelectionPolicy {
    fn from(s: SelectionArg) -> Self {
        match s {
            SelectionArg::MaxI => SelectionPolicy::MaxI,
            SelectionArg::MinEta => SelectionPolicy::MinEta,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    #[arg(long, value_enum)]
    pub scenario: ScenarioArg,
    #[arg(long, default_value_t = 1.0)]
    pub visibility: f64,
    #[arg(long, default_value_t = ScenarioConfig::DEFAULT_TRIALS)]
    pub trials: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 200)]
    pub bins: usize,
    /// START:STOP:STEP
    #[arg(long, default_value = "0.60:1.00:0.001")]
    pub eta_grid: String,
    #[arg(long, value_enum, default_value_t = SelectionArg::MaxI)]
    pub selection: SelectionArg,
    /// Worker threads (default: available parallelism)
    #[arg(long)]
    pub workers: Option<usize>,
    #[arg(long, default_value = "./results")]
    pub out_dir: PathBuf,
    #[arg(long, value_enum, default_value_t = Format::Both)]
    pub format: Format,
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// α/β of the shared state α|01⟩ + β|10⟩
    #[arg(long, default_value_t = 1.0)]
    pub alpha_ratio: f64,
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Comma-separated α/β values
    #[arg(long, default_value = "0.5,0.75,1.0")]
    pub alpha_ratios: String,
}

#[derive(Debug, Clone, Args)]
pub struct VerifyArgs {
    #[arg(long, default_value_t = 2, value_parser = clap::value_parser!(u8).range(2..=3))]
    pub settings: u8,
    /// Samples for the statistical checks
    #[arg(long, default_value_t = 1_000_000)]
    pub samples: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

impl CommonArgs {
    fn config(&self, alpha_ratio: f64) -> Result<ScenarioConfig, CliError> {
        let eta_grid: EtaGrid = self.eta_grid.parse()?;
        let mut config = ScenarioConfig {
            alpha_ratio,
            visibility: self.visibility,
            trials: self.trials,
            master_seed: self.seed,
            histogram_bins: self.bins,
            eta_grid,
            selection_policy: self.selection.into(),
            ..ScenarioConfig::new(self.scenario.into())
        };
        if let Some(w) = self.workers {
            config.workers = w;
        }
        config.validate()?;
        Ok(config)
    }
}

pub fn parse_ratios(list: &str) -> Result<Vec<f64>, CliError> {
    let ratios = list
        .split(',')
        .map(|r| {
            r.trim()
                .parse::<f64>()
                .ok()
                .filter(|v| *v > 0.0 && v.is_finite())
                .ok_or_else(|| CliError::Usage(format!("invalid alpha ratio '{r}' in '{list}'")))
        })
        .collect::<Result<Vec<_>, _>>()?;
    if ratios.is_empty() {
        return Err(CliError::Usage("empty alpha ratio list".into()));
    }
    Ok(ratios)
}

/// Prints throughput to stderr roughly every tenth of the run.
struct Progress {
    label: String,
    total: u64,
    started: Instant,
    last_decile: AtomicU64,
}

impl Progress {
    fn new(label: String, total: u64) -> Self {
        Self {
            label,
            total,
            started: Instant::now(),
            last_decile: AtomicU64::new(0),
        }
    }

    fn report(&self, done: u64) {
        let decile = done * 10 / self.total.max(1);
        if self.last_decile.fetch_max(decile, Ordering::Relaxed) < decile {
            let rate = done as f64 / self.started.elapsed().as_secs_f64().max(1e-9);
            eprintln!(
                "{}: {done}/{} trials ({}%), {rate:.0} trials/s",
                self.label,
                self.total,
                decile * 10
            );
        }
    }
}

fn print_summary(result: &ExperimentResult) {
    let s = &result.summary;
    let c = &result.config;
    println!(
        "scenario={} alpha_ratio={} visibility={} trials={} seed={}",
        c.scenario, c.alpha_ratio, c.visibility, s.trials, c.master_seed
    );
    for p in &s.named_points {
        println!(
            "  P_viol(eta<={:.3}) = {:.6e}  [{:.6e}, {:.6e}]  ({} trials)",
            p.eta, p.p_viol, p.ci_low, p.ci_high, p.violating
        );
    }
    match s.min_eta_req {
        Some(eta) => println!("  min eta_req = {eta:.9}"),
        None => println!("  min eta_req = none (no violation)"),
    }
    if let (Some(mean), Some(median)) = (s.mean_i_max_violating, s.median_i_max_violating) {
        println!("  I_max | violation: mean = {mean:.6e}, median = {median:.6e}");
    }
}

pub fn cmd_run(args: &RunArgs) -> Result<(), CliError> {
    let config = args.common.config(args.alpha_ratio)?;
    let progress = Progress::new(format!("{}", config.scenario), config.trials);
    let started = Instant::now();
    let result = run_experiment_with_progress(&config, |done| progress.report(done))?;
    let wall = started.elapsed().as_secs_f64();
    output::write_result(&args.common.out_dir, &result, args.common.format, wall)?;
    print_summary(&result);
    println!("  wall time = {wall:.2} s, outputs in {}", args.common.out_dir.display());
    Ok(())
}

fn series_dir(root: &Path, scenario: Scenario, ratio: f64) -> PathBuf {
    root.join(format!("{scenario}_ratio_{ratio}"))
}

pub fn cmd_sweep(args: &SweepArgs) -> Result<(), CliError> {
    let ratios = parse_ratios(&args.alpha_ratios)?;
    let configs = ratios
        .iter()
        .map(|&r| args.common.config(r))
        .collect::<Result<Vec<_>, _>>()?;
    let progress: Vec<Progress> = configs
        .iter()
        .map(|c| Progress::new(format!("{} alpha/beta={}", c.scenario, c.alpha_ratio), c.trials))
        .collect();
    let started = Instant::now();
    let results = sweep_with_progress(&configs, |ordinal, done| progress[ordinal].report(done))?;
    let wall = started.elapsed().as_secs_f64();

    let mut finished = Vec::new();
    let mut first_error = None;
    for (config, result) in configs.iter().zip(results) {
        match result {
            Ok(r) => {
                let dir = series_dir(&args.common.out_dir, config.scenario, config.alpha_ratio);
                output::write_result(&dir, &r, args.common.format, wall)?;
                print_summary(&r);
                finished.push(r);
            }
            Err(e) => {
                eprintln!("alpha/beta={}: {e}", config.alpha_ratio);
                first_error.get_or_insert(e);
            }
        }
    }
    let refs: Vec<&ExperimentResult> = finished.iter().collect();
    output::write_combined(&args.common.out_dir, &refs, args.common.format)?;
    println!("  wall time = {wall:.2} s, outputs in {}", args.common.out_dir.display());
    match first_error {
        Some(e) => Err(e.into()),
        None => Ok(()),
    }
}

pub fn cmd_verify(args: &VerifyArgs) -> Result<(), CliError> {
    let checks = run_checks(&VerifyOptions {
        settings: args.settings as usize,
        samples: args.samples,
        seed: args.seed,
    })?;
    for check in &checks {
        println!("{check}");
    }
    let failed = checks.iter().filter(|c| !c.passed).count();
    if failed > 0 {
        return Err(CliError::ChecksFailed(failed));
    }
    Ok(())
}

pub fn execute(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Sweep(args) => cmd_sweep(args),
        Command::Verify(args) => cmd_verify(args),
    }
}
