//! Drives the `clipopt` binary end to end: output locations, flag
//! overrides, and the exit-code contract (0 success, 1 failure, 2 usage).

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn clipopt(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_clipopt"))
        .args(args)
        .current_dir(dir)
        .env_remove("CLIPOPT_OUTPUT_DIR")
        .env_remove("CLIPOPT_DATA_DIR")
        .output()
        .expect("failed to start clipopt")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("terminated by signal")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path
}

const TOY: &str = r#"{"problem": {"kind": "toy", "n": 4, "noise": "weibull"},
 "method": "clipped-sgd", "iterations": 60, "trials": 3, "record_every": 20}"#;

/// 120 two-feature rows in which every feature vector occurs with both
/// labels, so the logistic optimum is finite.
fn write_dataset(dir: &Path) -> PathBuf {
    let text: String = (0..120)
        .map(|i| {
            let label = if i % 3 == 0 { -1 } else { 1 };
            format!("{label} 1:1 2:{}\n", (i % 5) as f64 * 0.5 - 1.0)
        })
        .collect();
    write(dir, "tiny.libsvm", &text)
}

fn json_file(path: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn run_writes_under_runs_named_after_the_config() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "toy.json", TOY);
    let out = clipopt(dir.path(), &["run", "toy.json"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let run = dir.path().join("runs/toy");
    for file in ["summary.json", "provenance.json", "quantiles.csv", "gap_vs_calls.svg", "trials/trial_0002.csv"] {
        assert!(run.join(file).is_file(), "missing {file}");
    }
    assert!(stdout(&out).contains("clipped-sgd: 3 trials x 60 iterations"));
}

#[test]
fn environment_sets_the_default_output_root_and_the_flag_wins() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "toy.json", TOY);
    let root = dir.path().join("elsewhere");
    let out = Command::new(env!("CARGO_BIN_EXE_clipopt"))
        .args(["run", "toy.json"])
        .current_dir(dir.path())
        .env("CLIPOPT_OUTPUT_DIR", &root)
        .output()
        .unwrap();
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert!(root.join("toy/summary.json").is_file());
    assert!(!dir.path().join("runs").exists());

    let out = Command::new(env!("CARGO_BIN_EXE_clipopt"))
        .args(["run", "toy.json", "--output-dir", "explicit"])
        .current_dir(dir.path())
        .env("CLIPOPT_OUTPUT_DIR", &root)
        .output()
        .unwrap();
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert!(dir.path().join("explicit/summary.json").is_file());
}

#[test]
fn flags_override_the_config_file() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "toy.json", TOY);
    let out = clipopt(
        dir.path(),
        &["run", "toy.json", "-o", "out", "--trials", "2", "--iterations", "30", "--seed", "7", "--record-every", "30", "--json"],
    );
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let summary: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(summary["trials"], 2);
    assert_eq!(summary["iterations"], 30);
    let provenance = json_file(&dir.path().join("out/provenance.json"));
    assert_eq!(provenance["config"]["seed"], 7);
    assert_eq!(provenance["config"]["trials"], 2);
    // Checkpoints 0 and 30 only.
    let csv = fs::read_to_string(dir.path().join("out/trials/trial_0000.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);
}

#[test]
fn identical_runs_write_identical_trials() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "toy.json", TOY);
    for name in ["a", "b"] {
        let out = clipopt(dir.path(), &["run", "toy.json", "-o", name, "--threads", "2"]);
        assert_eq!(code(&out), 0, "{}", stderr(&out));
    }
    for file in ["trials/trial_0000.csv", "trials/trial_0002.csv", "quantiles.csv", "summary.json"] {
        assert_eq!(
            fs::read(dir.path().join("a").join(file)).unwrap(),
            fs::read(dir.path().join("b").join(file)).unwrap(),
            "{file} differs"
        );
    }
}

#[test]
fn configuration_errors_exit_with_two_and_name_the_field() {
    let dir = tempfile::tempdir().unwrap();
    write(
        dir.path(),
        "bad.json",
        r#"{"problem": {"kind": "toy", "n": 4, "noise": "gaussian"}, "method": "clipped-sgd", "iterations": 10, "schedule": {"lamda": 1.0}}"#,
    );
    let out = clipopt(dir.path(), &["run", "bad.json"]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("schedule"), "{}", stderr(&out));

    write(dir.path(), "toy.json", TOY);
    assert_eq!(code(&clipopt(dir.path(), &["run", "toy.json", "--trials", "0"])), 2);
    assert_eq!(code(&clipopt(dir.path(), &["run", "toy.json", "--epsilon", "0.1"])), 2);
    assert_eq!(code(&clipopt(dir.path(), &["run", "missing.json"])), 2);
}

#[test]
fn usage_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    for args in [
        &["frobnicate"][..],
        &["run"],
        &["verify", "--level", "exhaustive"],
        &["verify", "--only", "12"],
        &["run", "x.json", "--iterations", "5", "--epochs", "1"],
    ] {
        let out = clipopt(dir.path(), args);
        assert_eq!(code(&out), 2, "{args:?}: {}", stderr(&out));
    }
    assert_eq!(code(&clipopt(dir.path(), &["--help"])), 0);
}

#[test]
fn data_problems_without_an_optimum_need_a_radius() {
    let dir = tempfile::tempdir().unwrap();
    write_dataset(dir.path());
    write(
        dir.path(),
        "logreg.json",
        r#"{"problem": {"kind": "logreg", "path": "tiny.libsvm"}, "method": "clipped-sgd", "iterations": 50}"#,
    );
    let out = clipopt(dir.path(), &["run", "logreg.json", "-o", "no-radius"]);
    assert_eq!(code(&out), 2, "{}", stderr(&out));
    assert!(stderr(&out).contains("schedule.r0"), "{}", stderr(&out));

    let out = clipopt(dir.path(), &["run", "logreg.json", "-o", "with-radius", "--radius", "2.0"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let provenance = json_file(&dir.path().join("with-radius/provenance.json"));
    assert_eq!(provenance["config"]["schedule"]["r0"], 2.0);

    assert_eq!(code(&clipopt(dir.path(), &["run", "logreg.json", "--radius", "-1"])), 2);
}

#[test]
fn solve_reference_then_diagnose() {
    let dir = tempfile::tempdir().unwrap();
    write_dataset(dir.path());
    // No optimum yet and no --solve: a usage error.
    let out = clipopt(dir.path(), &["diagnose", "tiny.libsvm"]);
    assert_eq!(code(&out), 2, "{}", stderr(&out));
    assert!(stderr(&out).contains("--solve"));

    let out = clipopt(dir.path(), &["solve-reference", "tiny.libsvm", "--tol", "1e-10", "--out", "tiny.opt.json"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert!(stdout(&out).starts_with("f* = "));
    assert!(dir.path().join("tiny.opt.json").is_file());

    let out = clipopt(
        dir.path(),
        &["diagnose", "tiny.libsvm", "--optimum", "tiny.opt.json", "--bins", "10", "-o", "diag", "--json"],
    );
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let summary: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(summary["report"]["samples"], 120);
    assert_eq!(summary["report"]["histogram"]["counts"].as_array().unwrap().len(), 10);
    for file in ["histogram.csv", "histogram.svg", "diagnostic.json"] {
        assert!(dir.path().join("diag").join(file).is_file(), "missing {file}");
    }
}

#[test]
fn unconverged_reference_solve_exits_with_one() {
    let dir = tempfile::tempdir().unwrap();
    write_dataset(dir.path());
    let out = clipopt(dir.path(), &["solve-reference", "tiny.libsvm", "--tol", "1e-14", "--max-iter", "2"]);
    assert_eq!(code(&out), 1, "{}", stderr(&out));
}

#[test]
fn missing_dataset_is_a_runtime_failure() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&clipopt(dir.path(), &["solve-reference", "absent.libsvm"])), 1);
}

#[test]
fn verify_reports_selected_criteria() {
    let dir = tempfile::tempdir().unwrap();
    let out = clipopt(dir.path(), &["verify", "--only", "1", "--only", "2"]);
    assert_eq!(code(&out), 0, "{}", stdout(&out));
    let text = stdout(&out);
    assert!(text.contains("[PASS]  1 schedule-identities"), "{text}");
    assert!(text.contains("[PASS]  2 clip-operator"), "{text}");

    let out = clipopt(dir.path(), &["verify", "--only", "2", "--json"]);
    assert_eq!(code(&out), 0);
    let report: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(report["criteria"].as_array().unwrap().len(), 1);
    assert_eq!(report["criteria"][0]["id"], 2);
}

#[test]
fn verify_without_datasets_skips_the_data_criterion() {
    let dir = tempfile::tempdir().unwrap();
    let out = clipopt(dir.path(), &["verify", "--level", "full", "--only", "10"]);
    assert_eq!(code(&out), 0, "{}", stdout(&out));
    assert!(stdout(&out).contains("SKIP"), "{}", stdout(&out));
}
