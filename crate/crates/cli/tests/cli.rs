use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn ascd(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ascd"))
        .current_dir(dir)
        .env_remove("ASCD_OUT_DIR")
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> Output {
    let out = ascd(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn read(path: impl AsRef<Path>) -> String {
    fs::read_to_string(path.as_ref()).unwrap_or_else(|e| panic!("{}: {e}", path.as_ref().display()))
}

fn json(path: impl AsRef<Path>) -> Value {
    serde_json::from_str(&read(path)).unwrap()
}

fn column(csv: &str, name: &str) -> Vec<String> {
    let mut lines = csv.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let k = header.iter().position(|h| *h == name).unwrap();
    lines.map(|l| l.split(',').nth(k).unwrap().to_string()).collect()
}

/// 30 × 40 synthetic dataset in a fresh directory.
fn workspace() -> (TempDir, PathBuf) {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["--seed", "7", "generate", "--rows", "30", "--cols", "40", "--tag", "syn"]);
    let data = dir.path().join("syn.svm");
    (dir, data)
}

#[test]
fn generate_is_deterministic_and_writes_sidecar() {
    let (dir, data) = workspace();
    ok(dir.path(), &["--seed", "7", "generate", "--rows", "30", "--cols", "40", "--tag", "again"]);
    assert_eq!(read(&data), read(dir.path().join("again.svm")));
    let sidecar = json(dir.path().join("syn.json"));
    assert_eq!(sidecar["schema_version"], 1);
    assert_eq!(sidecar["config"]["seed"], 7);
    assert_eq!(sidecar["config"]["cols"], 40);
}

#[test]
fn run_writes_trace_and_summary() {
    let (dir, _) = workspace();
    ok(dir.path(), &["--seed", "1", "run", "--data", "syn.svm", "--rule", "ascd", "--oracle", "g4", "--steps", "10n", "--l2", "0.1"]);
    let trace = read(dir.path().join("run.trace.csv"));
    assert_eq!(trace.lines().count(), 1 + 400);
    assert!(trace.starts_with("t,i,f,"));
    let summary = json(dir.path().join("run.summary.json"));
    assert_eq!(summary["schema_version"], 1);
    assert_eq!(summary["steps"], 400);
    assert_eq!(summary["epochs"], 10.0);
    assert!(summary["final_f"].as_f64().unwrap() <= summary["initial_f"].as_f64().unwrap());
    assert!(summary["mean_active_size"].as_f64().is_some());
    assert!(summary["wall_ns"].is_null());
}

#[test]
fn run_is_reproducible_byte_for_byte() {
    let (dir, _) = workspace();
    let args = ["--seed", "3", "run", "--data", "syn.svm", "--rule", "a-ascd", "--l1", "0.5", "--diagnostics-every", "7"];
    ok(dir.path(), &args);
    let first = (read(dir.path().join("run.trace.csv")), read(dir.path().join("run.summary.json")));
    ok(dir.path(), &args);
    let second = (read(dir.path().join("run.trace.csv")), read(dir.path().join("run.summary.json")));
    assert_eq!(first, second);
}

#[test]
fn exact_oracle_replays_steepest_descent() {
    let (dir, _) = workspace();
    ok(dir.path(), &["--seed", "1", "run", "--data", "syn.svm", "--rule", "scd", "--l2", "0.1", "--tag", "scd"]);
    ok(dir.path(), &[
        "--seed", "1", "run", "--data", "syn.svm", "--rule", "ascd", "--oracle", "g1",
        "--init", "true-gradient", "--l2", "0.1", "--tag", "ascd",
    ]);
    let a = column(&read(dir.path().join("scd.trace.csv")), "i");
    let b = column(&read(dir.path().join("ascd.trace.csv")), "i");
    assert_eq!(a, b);
}

#[test]
fn uninitialized_estimate_starts_with_full_active_set() {
    let (dir, _) = workspace();
    ok(dir.path(), &["run", "--data", "syn.svm", "--rule", "ascd", "--init", "none", "--l2", "0.1"]);
    let sizes = column(&read(dir.path().join("run.trace.csv")), "active_size");
    assert_eq!(sizes[0], "40");
}

#[test]
fn sweep_seed_axis_gives_one_trace_per_seed() {
    let (dir, _) = workspace();
    let out = ok(dir.path(), &["sweep", "--data", "syn.svm", "--l2", "0.1", "--steps", "2n", "--seeds", "1..10", "--out", "sw", "--jobs", "3"]);
    assert!(String::from_utf8_lossy(&out.stdout).contains("10 of 10"));
    let headers: Vec<String> = (0..10)
        .map(|k| read(dir.path().join(format!("sw/sweep-{k:04}.trace.csv"))).lines().next().unwrap().to_string())
        .collect();
    assert!(headers.windows(2).all(|w| w[0] == w[1]));
    let summary = read(dir.path().join("sw/sweep.summary.csv"));
    assert_eq!(summary.lines().count(), 11);
    assert_eq!(column(&summary, "seed"), (1..=10).map(|s| s.to_string()).collect::<Vec<_>>());
}

#[test]
fn sweep_with_empty_axes_matches_run() {
    let (dir, _) = workspace();
    ok(dir.path(), &["--seed", "5", "sweep", "--data", "syn.svm", "--l2", "0.1", "--out", "sw"]);
    ok(dir.path(), &["--seed", "5", "run", "--data", "syn.svm", "--l2", "0.1", "--out", "single"]);
    assert_eq!(
        read(dir.path().join("sw/sweep-0000.trace.csv")),
        read(dir.path().join("single/run.trace.csv"))
    );
}

#[test]
fn sweep_reports_failed_cells() {
    let (dir, _) = workspace();
    let out = ascd(dir.path(), &[
        "sweep", "--data", "syn.svm", "--l1", "0.1", "--update", "fixed", "--rules", "ucd,scd", "--out", "sw",
    ]);
    assert!(!out.status.success());
    let failed = read(dir.path().join("sw/sweep.failed.csv"));
    assert_eq!(failed.lines().count(), 3);
    assert!(failed.contains("smooth"));
}

#[test]
fn sweep_respects_cell_cap() {
    let (dir, _) = workspace();
    let out = ascd(dir.path(), &["sweep", "--data", "syn.svm", "--seeds", "1..20", "--max-cells", "5"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("cap"));
}

#[test]
fn hardcase_verifies_cycling() {
    let dir = tempfile::tempdir().unwrap();
    let out = ok(dir.path(), &["hardcase", "--n", "20", "--alpha", "0.01", "--steps", "100", "--start", "worst"]);
    assert!(String::from_utf8_lossy(&out.stdout).contains("cycling verified"));
    let csv = read(dir.path().join("hardcase.csv"));
    assert!(csv.starts_with("t,i,omega,grad_inf\n"));
    let picks = column(&csv, "i");
    assert_eq!(picks.len(), 100);
    assert!(picks.iter().enumerate().all(|(t, i)| *i == (t % 20).to_string()));
    let summary = json(dir.path().join("hardcase.summary.json"));
    assert_eq!(summary["verified"], true);
    assert!(summary["max_omega"].as_f64().unwrap() <= 4.0);
}

#[test]
fn hardcase_rejects_alpha_outside_range() {
    let dir = tempfile::tempdir().unwrap();
    for alpha in ["0.6", "0", "0.5", "-1"] {
        let out = ascd(dir.path(), &["hardcase", "--alpha", alpha]);
        assert_eq!(out.status.code(), Some(2), "alpha {alpha}");
    }
}

#[test]
fn hardcase_ones_start_skips_verification() {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["hardcase", "--n", "10", "--start", "ones"]);
    let summary = json(dir.path().join("hardcase.summary.json"));
    assert!(summary["verified"].is_null());
    assert_eq!(summary["steps"], 50);
}

#[test]
fn ratio_sim_reports_closed_form_and_mean() {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["ratio-sim", "--n", "100", "--s", "10", "--c", "1", "--t-inf", "400", "--steps", "20000"]);
    let csv = read(dir.path().join("ratio.csv"));
    assert!(csv.starts_with("t,rho,active_size\n"));
    assert_eq!(csv.lines().count(), 20_001);
    let summary = json(dir.path().join("ratio.summary.json"));
    assert_eq!(summary["schema_version"], 1);
    let closed = summary["closed_form"]["rho"].as_f64().unwrap();
    let bound = summary["closed_form"]["simple_bound"].as_f64().unwrap();
    let mean = summary["empirical_mean"].as_f64().unwrap();
    assert!(closed >= bound);
    assert!((closed - mean).abs() < 0.1);
}

#[test]
fn config_file_is_overridden_by_flags() {
    let (dir, _) = workspace();
    fs::write(
        dir.path().join("cfg.json"),
        r#"{"command": "run", "data": "syn.svm", "rule": "ucd", "steps": "3n", "l2": 0.1, "tag": "fromcfg", "seed": 2}"#,
    )
    .unwrap();
    ok(dir.path(), &["--config", "cfg.json", "--rule", "scd"]);
    let summary = json(dir.path().join("fromcfg.summary.json"));
    assert_eq!(summary["rule"], "scd");
    assert_eq!(summary["steps"], 120);
    assert_eq!(summary["seed"], 2);
    ok(dir.path(), &["--seed", "9", "run", "--config", "cfg.json"]);
    assert_eq!(json(dir.path().join("fromcfg.summary.json"))["seed"], 9);
}

#[test]
fn output_directory_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let status = Command::new(env!("CARGO_BIN_EXE_ascd"))
        .current_dir(dir.path())
        .env("ASCD_OUT_DIR", "envout")
        .args(["hardcase", "--n", "5"])
        .status()
        .unwrap();
    assert!(status.success());
    assert!(dir.path().join("envout/hardcase.csv").exists());
}

#[test]
fn bad_inputs_fail_with_message() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("bad.svm"), "1 1:0.5\n2 x:1\n").unwrap();
    let out = ascd(dir.path(), &["run", "--data", "bad.svm"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2"));

    let out = ascd(dir.path(), &["run", "--data", "missing.svm"]);
    assert!(!out.status.success());

    let out = ascd(dir.path(), &["run", "--data", "bad.svm", "--l1", "1", "--l2", "1"]);
    assert_eq!(out.status.code(), Some(2));

    let out = ascd(dir.path(), &["run", "--data", "bad.svm", "--steps", "ten"]);
    assert_eq!(out.status.code(), Some(2));
}
