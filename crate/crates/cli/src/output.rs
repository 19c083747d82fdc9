//! Result files. CSV reals use fixed notation with 17 significant digits,
//! LF line endings and a stable column order, so identical runs produce
//! byte-identical files on every platform.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::Path;

use bellsim_core::{ExperimentResult, ScenarioConfig};
use serde::Serialize;
use serde_json::json;

/// Output formats selected with `--format`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Csv,
    Json,
    Both,
}

impl Format {
    fn csv(self) -> bool {
        matches!(self, Format::Csv | Format::Both)
    }

    fn json(self) -> bool {
        matches!(self, Format::Json | Format::Both)
    }
}

/// Fixed-notation decimal with 17 significant digits.
pub fn fmt_real(x: f64) -> String {
    if !x.is_finite() {
        return x.to_string();
    }
    if x == 0.0 {
        return format!("{:.16}", 0.0);
    }
    // exponent after rounding to 17 significant digits
    let sci = format!("{x:.16e}");
    let exp: i32 = sci[sci.find('e').unwrap() + 1..].parse().unwrap();
    let decimals = (16 - exp).max(0) as usize;
    format!("{x:.decimals$}")
}

fn config_line(config: &ScenarioConfig) -> String {
    format!("# config: {}\n", serde_json::to_string(config).expect("config serializes"))
}

pub fn histogram_csv(result: &ExperimentResult) -> String {
    let h = &result.histogram;
    let mut out = config_line(&result.config);
    out.push_str("bin_low,bin_high,count\n");
    for (i, count) in h.counts.iter().enumerate() {
        let _ = writeln!(
            out,
            "{},{},{}",
            fmt_real(h.bin_edges[i]),
            fmt_real(h.bin_edges[i + 1]),
            count
        );
    }
    out
}

fn curve_rows(out: &mut String, result: &ExperimentResult, prefix: Option<f64>) {
    let c = &result.curve;
    for i in 0..c.etas.len() {
        if let Some(ratio) = prefix {
            let _ = write!(out, "{},", fmt_real(ratio));
        }
        let _ = writeln!(
            out,
            "{},{},{},{}",
            fmt_real(c.etas[i]),
            fmt_real(c.p_viol[i]),
            fmt_real(c.ci_low[i]),
            fmt_real(c.ci_high[i])
        );
    }
}

pub fn curve_csv(result: &ExperimentResult) -> String {
    let mut out = config_line(&result.config);
    out.push_str("eta,p_viol,ci_low,ci_high\n");
    curve_rows(&mut out, result, None);
    out
}

/// One table holding every series of a sweep, keyed by `alpha_ratio`.
pub fn combined_curve_csv(results: &[&ExperimentResult]) -> String {
    let mut out = String::new();
    for r in results {
        out.push_str(&config_line(&r.config));
    }
    out.push_str("alpha_ratio,eta,p_viol,ci_low,ci_high\n");
    for r in results {
        curve_rows(&mut out, r, Some(r.config.alpha_ratio));
    }
    out
}

pub fn summary_json(result: &ExperimentResult, wall_time_seconds: f64) -> serde_json::Value {
    let s = &result.summary;
    let state = result.config.state().ok();
    json!({
        "config": result.config,
        "state": state.map(|st| json!({
            "alpha": st.state().alpha(),
            "beta": st.state().beta(),
            "concurrence": st.state().concurrence(),
            "visibility": st.visibility(),
        })),
        "scenario": result.config.scenario,
        "trials": s.trials,
        "seed": result.config.master_seed,
        "violating_trials": s.violating_trials,
        "p_viol_at_one": s.p_viol_at_one,
        "p_viol_at_one_ci95": [s.p_viol_at_one_ci.0, s.p_viol_at_one_ci.1],
        "p_viol_at": s.named_points,
        "min_eta_req": s.min_eta_req,
        "i_max_violating": {
            "mean": s.mean_i_max_violating,
            "median": s.median_i_max_violating,
            "max": s.max_i_max,
        },
        "wall_time_seconds": wall_time_seconds,
    })
}

#[derive(Serialize)]
struct TableJson<'a, T: Serialize> {
    config: &'a ScenarioConfig,
    #[serde(flatten)]
    table: &'a T,
}

fn write(path: &Path, contents: &str) -> io::Result<()> {
    fs::write(path, contents)
}

/// Writes one experiment's files into `dir`.
pub fn write_result(
    dir: &Path,
    result: &ExperimentResult,
    format: Format,
    wall_time_seconds: f64,
) -> io::Result<()> {
    fs::create_dir_all(dir)?;
    if format.csv() {
        write(&dir.join("histogram.csv"), &histogram_csv(result))?;
        write(&dir.join("curve.csv"), &curve_csv(result))?;
    }
    if format.json() {
        let histogram = TableJson {
            config: &result.config,
            table: &result.histogram,
        };
        let curve = TableJson {
            config: &result.config,
            table: &result.curve,
        };
        write(&dir.join("histogram.json"), &to_pretty(&histogram))?;
        write(&dir.join("curve.json"), &to_pretty(&curve))?;
    }
    write(
        &dir.join("summary.json"),
        &to_pretty(&summary_json(result, wall_time_seconds)),
    )
}

pub fn write_combined(dir: &Path, results: &[&ExperimentResult], format: Format) -> io::Result<()> {
    fs::create_dir_all(dir)?;
    if format.csv() {
        write(&dir.join("curves_combined.csv"), &combined_curve_csv(results))?;
    }
    if format.json() {
        let series: Vec<_> = results
            .iter()
            .map(|r| json!({ "alpha_ratio": r.config.alpha_ratio, "config": r.config, "curve": r.curve }))
            .collect();
        write(&dir.join("curves_combined.json"), &to_pretty(&series))?;
    }
    Ok(())
}

fn to_pretty<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("result serializes");
    s.push('\n');
    s
}
