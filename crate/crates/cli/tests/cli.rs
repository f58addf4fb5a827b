//! End-to-end checks of the `coreplan` binary: exit codes, stage
//! chaining, and output files.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_coreplan"))
}

fn repo_root() -> PathBuf {
    // crates/cli -> workspace root
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..").canonicalize().unwrap()
}

fn run(args: &[&str]) -> Output {
    bin().args(args).current_dir(repo_root()).output().expect("binary runs")
}

#[test]
fn unknown_flag_is_a_usage_error() {
    let out = run(&["simulate", "--definitely-not-a-flag"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn missing_subcommand_is_a_usage_error() {
    let out = run(&[]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn help_succeeds() {
    let out = run(&["--help"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("simulate"));
    assert!(text.contains("allocate"));
}

#[test]
fn missing_trace_file_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&[
        "select",
        "--source",
        "csv",
        "--trace-csv",
        "/nonexistent/trace.csv",
        "--out-dir",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2), "stderr: {}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn malformed_sim_config_is_a_data_error_with_location() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "m = 4\nambient = \"not a number\"\n").unwrap();
    let out = run(&[
        "simulate",
        "--sim-config",
        bad.to_str().unwrap(),
        "--out-dir",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line") || err.contains("ambient"), "stderr: {err}");
}

#[test]
fn evaluate_without_train_is_a_missing_model_error() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("run");
    let base = [
        "--sim-config",
        "configs/two_cluster.toml",
        "--n-runs",
        "40",
        "--seed",
        "5",
        "--n-trees",
        "20",
        "--cv-trees",
        "8",
        "--k-grid",
        "2,4",
        "--out-dir",
        out_dir.to_str().unwrap(),
    ];
    let mut args = vec!["simulate"];
    args.extend_from_slice(&base);
    assert_eq!(run(&args).status.code(), Some(0));
    let mut args = vec!["select"];
    args.extend_from_slice(&base);
    let out = run(&args);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let mut args = vec!["evaluate"];
    args.extend_from_slice(&base);
    let out = run(&args);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("model"));
}

#[test]
fn small_pipeline_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("run");
    let base = [
        "--sim-config",
        "configs/two_cluster.toml",
        "--n-runs",
        "60",
        "--seed",
        "11",
        "--n-trees",
        "20",
        "--cv-trees",
        "8",
        "--k-grid",
        "2,4,6",
        "--comparison-trials",
        "10",
        "--epochs",
        "10",
        "--bootstrap-resamples",
        "3",
        "--hidden",
        "8",
        "--out-dir",
        out_dir.to_str().unwrap(),
    ];
    for stage in ["simulate", "select", "allocate", "train", "evaluate", "report"] {
        let mut args = vec![stage];
        args.extend_from_slice(&base);
        let out = run(&args);
        assert_eq!(
            out.status.code(),
            Some(0),
            "stage {stage} failed: {}",
            String::from_utf8_lossy(&out.stderr)
        );
    }
    for file in [
        "features.csv",
        "temperature.csv",
        "importance.csv",
        "cv_curve.csv",
        "stepwise.csv",
        "selection.json",
        "correlation.csv",
        "correlation_long.csv",
        "allocation.json",
        "outcomes.csv",
        "comparison.json",
        "model_fcn.txt",
        "model_fcn_rf.txt",
        "model_fcn_rf_bs.txt",
        "metrics.csv",
        "evaluation.csv",
        "report.json",
        "manifest_simulate.json",
        "manifest_select.json",
        "manifest_allocate.json",
        "manifest_train.json",
        "manifest_evaluate.json",
        "manifest_report.json",
    ] {
        assert!(out_dir.join(file).exists(), "missing {file}");
    }
}
