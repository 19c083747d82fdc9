use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use bellsim_core::ScenarioConfig;
use tempfile::TempDir;

fn bellsim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bellsim"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn run_into(dir: &Path, extra: &[&str]) -> Output {
    let mut args = vec!["run", "--out-dir", dir.to_str().unwrap()];
    args.extend_from_slice(extra);
    bellsim(&args)
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn read(path: &Path) -> String {
    fs::read_to_string(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

fn summary(dir: &Path) -> serde_json::Value {
    serde_json::from_str(&read(&dir.join("summary.json"))).unwrap()
}

#[test]
fn run_writes_all_outputs() {
    let tmp = TempDir::new().unwrap();
    let out = run_into(tmp.path(), &["--scenario", "rim", "--trials", "100000"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for name in ["histogram.csv", "curve.csv", "histogram.json", "curve.json", "summary.json"] {
        assert!(tmp.path().join(name).is_file(), "missing {name}");
    }
    let s = summary(tmp.path());
    let p = s["p_viol_at_one"].as_f64().unwrap();
    assert!((p - 0.28).abs() < 0.01, "p_viol(1) = {p}");
    assert_eq!(s["trials"], 100_000);

    let curve = read(&tmp.path().join("curve.csv"));
    let mut lines = curve.lines();
    assert!(lines.next().unwrap().starts_with("# config: {"));
    assert_eq!(lines.next().unwrap(), "eta,p_viol,ci_low,ci_high");
    assert_eq!(lines.count(), 401);
    let hist = read(&tmp.path().join("histogram.csv"));
    assert_eq!(hist.lines().nth(1).unwrap(), "bin_low,bin_high,count");
    assert_eq!(hist.lines().count(), 2 + 200);
}

#[test]
fn format_flag_selects_files() {
    let tmp = TempDir::new().unwrap();
    let out = run_into(tmp.path(), &["--scenario", "rom", "--trials", "2000", "--format", "csv"]);
    assert!(out.status.success());
    assert!(tmp.path().join("curve.csv").is_file());
    assert!(!tmp.path().join("curve.json").exists());
    assert!(tmp.path().join("summary.json").is_file());
}

#[test]
fn invalid_arguments_exit_with_usage_code() {
    let tmp = TempDir::new().unwrap();
    for extra in [
        &["--scenario", "rim", "--trials", "0"][..],
        &["--scenario", "rim", "--visibility", "1.5"],
        &["--scenario", "rim", "--eta-grid", "0.9:0.6:0.001"],
        &["--scenario", "bogus"],
        &["--trials", "10"],
    ] {
        let out = run_into(tmp.path(), extra);
        assert_eq!(out.status.code(), Some(1), "{extra:?}");
    }
    assert_eq!(bellsim(&["verify", "--settings", "4"]).status.code(), Some(1));
}

#[test]
fn identical_flags_give_identical_bytes() {
    let (a, b) = (TempDir::new().unwrap(), TempDir::new().unwrap());
    let flags = ["--scenario", "rotm", "--trials", "5000", "--alpha-ratio", "0.6", "--seed", "17"];
    assert!(run_into(a.path(), &flags).status.success());
    assert!(run_into(b.path(), &flags).status.success());
    for name in ["histogram.csv", "curve.csv", "histogram.json", "curve.json"] {
        assert_eq!(read(&a.path().join(name)), read(&b.path().join(name)), "{name}");
    }
}

#[test]
fn worker_count_does_not_change_results() {
    let (a, b) = (TempDir::new().unwrap(), TempDir::new().unwrap());
    let flags = ["--scenario", "rim", "--trials", "10000", "--seed", "3"];
    assert!(run_into(a.path(), &[&flags[..], &["--workers", "1"]].concat()).status.success());
    assert!(run_into(b.path(), &[&flags[..], &["--workers", "4"]].concat()).status.success());
    let body = |dir: &Path| read(&dir.join("curve.csv")).lines().skip(1).collect::<Vec<_>>().join("\n");
    assert_eq!(body(a.path()), body(b.path()));
}

#[test]
fn sweep_writes_series_and_combined_curves() {
    let tmp = TempDir::new().unwrap();
    let out = bellsim(&[
        "sweep",
        "--scenario",
        "rim",
        "--trials",
        "3000",
        "--out-dir",
        tmp.path().to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for ratio in ["0.5", "0.75", "1"] {
        assert!(tmp.path().join(format!("rim_ratio_{ratio}")).join("curve.csv").is_file());
    }
    let combined = read(&tmp.path().join("curves_combined.csv"));
    // one config comment per series, then a single header
    assert!(combined.lines().take(3).all(|l| l.starts_with("# config: ")));
    assert_eq!(combined.lines().nth(3).unwrap(), "alpha_ratio,eta,p_viol,ci_low,ci_high");
    assert_eq!(combined.lines().count(), 4 + 3 * 401);
    assert!(tmp.path().join("curves_combined.json").is_file());
}

#[test]
fn single_ratio_sweep_matches_run() {
    let (run_dir, sweep_dir) = (TempDir::new().unwrap(), TempDir::new().unwrap());
    let flags = ["--scenario", "rom", "--trials", "4000", "--seed", "5"];
    let args = [&flags[..], &["--alpha-ratio", "0.75"]].concat();
    assert!(run_into(run_dir.path(), &args).status.success());
    let mut sweep = vec!["sweep", "--alpha-ratios", "0.75", "--out-dir", sweep_dir.path().to_str().unwrap()];
    sweep.extend_from_slice(&flags);
    assert!(bellsim(&sweep).status.success());
    let series = sweep_dir.path().join("rom_ratio_0.75");
    for name in ["curve.csv", "histogram.csv"] {
        assert_eq!(read(&run_dir.path().join(name)), read(&series.join(name)), "{name}");
    }
}

#[test]
fn malformed_ratio_list_is_rejected() {
    let tmp = TempDir::new().unwrap();
    for list in ["0.5,abc", "0.5,,1", "-1"] {
        let out = bellsim(&[
            "sweep",
            "--scenario",
            "rim",
            "--trials",
            "100",
            "--alpha-ratios",
            list,
            "--out-dir",
            tmp.path().to_str().unwrap(),
        ]);
        assert_eq!(out.status.code(), Some(1), "{list}");
    }
}

#[test]
fn verify_reports_each_check() {
    let out = bellsim(&["verify", "--samples", "90000"]);
    assert!(out.status.success(), "{}", stdout(&out));
    let text = stdout(&out);
    assert!(text.contains("LHV bound (2 settings): max I = 0.000000e0 PASS"), "{text}");
    assert!(!text.contains("FAIL"));

    let out = bellsim(&["verify", "--settings", "3", "--samples", "90000"]);
    assert!(out.status.success(), "{}", stdout(&out));
    assert!(stdout(&out).contains("LHV bound (3 settings): max I = 0.000000e0 PASS"));
}

#[test]
fn summary_config_reproduces_the_run() {
    let (first, replay) = (TempDir::new().unwrap(), TempDir::new().unwrap());
    let flags = ["--scenario", "rim", "--trials", "6000", "--alpha-ratio", "0.3", "--seed", "99", "--visibility", "0.95"];
    assert!(run_into(first.path(), &flags).status.success());
    let config: ScenarioConfig = serde_json::from_value(summary(first.path())["config"].clone()).unwrap();
    assert_eq!(config.master_seed, 99);
    assert_eq!(config.alpha_ratio, 0.3);

    let (ratio, vis, trials, seed, bins, workers) = (
        config.alpha_ratio.to_string(),
        config.visibility.to_string(),
        config.trials.to_string(),
        config.master_seed.to_string(),
        config.histogram_bins.to_string(),
        config.workers.to_string(),
    );
    let grid = config.eta_grid.to_string();
    let out = run_into(
        replay.path(),
        &[
            "--scenario",
            &config.scenario.to_string(),
            "--alpha-ratio",
            &ratio,
            "--visibility",
            &vis,
            "--trials",
            &trials,
            "--seed",
            &seed,
            "--bins",
            &bins,
            "--eta-grid",
            &grid,
            "--workers",
            &workers,
        ],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for name in ["histogram.csv", "curve.csv"] {
        assert_eq!(read(&first.path().join(name)), read(&replay.path().join(name)), "{name}");
    }
}
