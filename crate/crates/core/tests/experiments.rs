//! End-to-end runs of the experiment harness and the tail diagnostic.

use std::fs;
use std::path::Path;

use clipopt::experiment::{
    run_diagnostic, run_experiment, solve_and_cache, DiagnosticConfig, ExperimentConfig, Method, NoiseKind,
    ProblemSpec,
};
use clipopt::problems::{optimum_cache_path, write_libsvm, SparseDataset};
use clipopt::{Error, RngStream};
use rand::Rng;
use rand_distr::StandardNormal;

fn toy(method: Method, n: usize, noise: NoiseKind) -> ExperimentConfig {
    ExperimentConfig::new(ProblemSpec::Toy { n, noise }, method)
}

fn csv_rows(path: &Path) -> Vec<String> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(str::to_string)
        .collect()
}

/// Dense Gaussian features with labels from a noisy linear model: not
/// separable, so the logistic optimum is finite.
fn gaussian_dataset(rows: usize, cols: usize, seed: u64) -> SparseDataset {
    let mut rng = RngStream::new(seed, 0);
    let w: Vec<f64> = (0..cols).map(|_| rng.sample(StandardNormal)).collect();
    let mut dense = Vec::new();
    let mut labels = Vec::new();
    for _ in 0..rows {
        let a: Vec<f64> = (0..cols).map(|_| rng.sample(StandardNormal)).collect();
        let margin: f64 = a.iter().zip(&w).map(|(x, y)| x * y).sum();
        let p = 1.0 / (1.0 + (-margin).exp());
        labels.push(if rng.random::<f64>() < p { 1.0 } else { -1.0 });
        dense.push(a);
    }
    SparseDataset::from_dense(&dense, &labels).unwrap()
}

fn write_dataset(dir: &Path, data: &SparseDataset) -> std::path::PathBuf {
    let path = dir.join("synthetic.libsvm");
    let mut file = fs::File::create(&path).unwrap();
    write_libsvm(data, &mut file).unwrap();
    path
}

#[test]
fn toy_run_writes_the_run_directory() {
    let dir = tempfile::tempdir().unwrap();
    let mut config = toy(Method::ClippedSgd, 5, NoiseKind::Weibull);
    config.iterations = Some(100);
    config.trials = 4;
    config.record_every = 10;
    let summary = run_experiment(&config, dir.path()).unwrap();
    for file in [
        "provenance.json",
        "summary.json",
        "quantiles.csv",
        "gap_vs_iterations.svg",
        "gap_vs_calls.svg",
        "trials/trial_0000.csv",
        "trials/trial_0003.json",
    ] {
        assert!(dir.path().join(file).is_file(), "missing {file}");
    }
    assert_eq!(summary.trials, 4);
    assert_eq!(summary.iterations, 100);
    // Checkpoints 0, 10, ..., 100.
    assert_eq!(csv_rows(&dir.path().join("trials/trial_0000.csv")).len(), 11);
    assert_eq!(csv_rows(&dir.path().join("quantiles.csv")).len(), 11);
    // The theorem policy makes a bound available for the convex method.
    assert!(summary.bound.is_some());
    assert_eq!(summary.quantile_levels, vec![0.5, 0.9]);
    let provenance: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("provenance.json")).unwrap()).unwrap();
    assert_eq!(provenance["config"]["method"], "clipped-sgd");
    assert_eq!(provenance["seeds"]["stream_ids"].as_array().unwrap().len(), 4);
}

#[test]
fn recording_every_n_steps_keeps_start_and_end() {
    let dir = tempfile::tempdir().unwrap();
    let mut config = toy(Method::ClippedSstm, 3, NoiseKind::Burr);
    config.iterations = Some(50);
    config.record_every = 50;
    run_experiment(&config, dir.path()).unwrap();
    let rows = csv_rows(&dir.path().join("trials/trial_0000.csv"));
    assert_eq!(rows.len(), 2);
    assert!(rows[0].starts_with("0,"));
    assert!(rows[1].starts_with("50,"));
}

#[test]
fn reruns_are_byte_identical() {
    let mut config = toy(Method::RClippedSstm, 2, NoiseKind::Gaussian);
    config.epsilon = Some(0.05);
    config.trials = 3;
    config.record_every = 100;
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    run_experiment(&config, a.path()).unwrap();
    run_experiment(&config, b.path()).unwrap();
    for file in ["summary.json", "provenance.json", "quantiles.csv", "trials/trial_0002.csv"] {
        assert_eq!(
            fs::read(a.path().join(file)).unwrap(),
            fs::read(b.path().join(file)).unwrap(),
            "{file} differs"
        );
    }
}

#[test]
fn config_errors_name_the_field() {
    let err = ExperimentConfig::from_json_str(
        r#"{"problem": {"kind": "toy", "n": 3, "noise": "gaussian"}, "method": "sgd", "schedule": {"gama": 0.1}}"#,
    )
    .unwrap_err();
    match err {
        Error::Config { field, .. } => assert!(field.starts_with("schedule"), "{field}"),
        other => panic!("unexpected error {other}"),
    }
    let err = ExperimentConfig::from_json_str(r#"{"problem": {"kind": "toy", "n": 3, "noise": "cauchy"}, "method": "sgd"}"#)
        .unwrap_err();
    assert!(matches!(err, Error::Config { .. }));
}

#[test]
fn restarted_methods_reject_merely_convex_problems() {
    let dir = tempfile::tempdir().unwrap();
    let data_path = write_dataset(dir.path(), &gaussian_dataset(40, 3, 1));
    let mut config = ExperimentConfig::new(
        ProblemSpec::Logreg {
            path: data_path,
            optimum: None,
        },
        Method::RClippedSgd,
    );
    config.epsilon = Some(1e-3);
    assert!(run_experiment(&config, &dir.path().join("run")).is_err());
}

#[test]
fn logreg_run_uses_the_cached_optimum() {
    let dir = tempfile::tempdir().unwrap();
    let data_path = write_dataset(dir.path(), &gaussian_dataset(120, 4, 2));
    let (reference, cache) = solve_and_cache(&data_path, 1e-10, 100_000, None).unwrap();
    assert_eq!(cache, optimum_cache_path(&data_path));
    assert!(reference.grad_norm <= 1e-10);

    let mut config = ExperimentConfig::new(
        ProblemSpec::Logreg {
            path: data_path,
            optimum: None,
        },
        Method::ClippedSstm,
    );
    config.epochs = Some(20.0);
    config.trials = 2;
    let summary = run_experiment(&config, &dir.path().join("run")).unwrap();
    // 20 epochs of 120 samples at the default batch.
    assert!(summary.iterations > 0);
    for t in &summary.per_trial {
        let gap = t.output_gap.unwrap();
        assert!(gap >= 0.0 && gap.is_finite());
    }
}

#[test]
fn diagnostic_classifies_gaussian_finite_sum_as_light() {
    let dir = tempfile::tempdir().unwrap();
    // Labels independent of Gaussian features put x* near 0, where
    // grad f_i(x*) ~ -y_i a_i / 2 is itself Gaussian.
    let mut rng = RngStream::new(3, 0);
    let rows: Vec<Vec<f64>> = (0..2000)
        .map(|_| (0..13).map(|_| rng.sample(StandardNormal)).collect())
        .collect();
    let labels: Vec<f64> = (0..2000).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
    let data_path = write_dataset(dir.path(), &SparseDataset::from_dense(&rows, &labels).unwrap());
    let mut config = DiagnosticConfig::new(&data_path);
    assert!(matches!(
        run_diagnostic(&config, &dir.path().join("diag")),
        Err(Error::Precondition(_))
    ));
    config.solve = true;
    let summary = run_diagnostic(&config, &dir.path().join("diag")).unwrap();
    assert_eq!(summary.classification, "light");
    assert_eq!(summary.report.samples, 2000);
    assert_eq!(summary.report.histogram.counts.iter().sum::<u64>(), 2000);
    for file in ["histogram.csv", "histogram.svg", "diagnostic.json"] {
        assert!(dir.path().join("diag").join(file).is_file());
    }
    // The cache written by `--solve` is reused on the next call.
    config.solve = false;
    assert!(run_diagnostic(&config, &dir.path().join("diag2")).is_ok());
}

#[test]
fn diagnostic_flags_outlier_rows_as_heavy() {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = RngStream::new(4, 0);
    let rows: Vec<Vec<f64>> = (0..2000)
        .map(|i| {
            let scale = if i % 100 == 0 { 30.0 } else { 1.0 };
            (0..13).map(|_| scale * rng.sample::<f64, _>(StandardNormal)).collect()
        })
        .collect();
    let labels: Vec<f64> = (0..2000).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
    let data_path = write_dataset(dir.path(), &SparseDataset::from_dense(&rows, &labels).unwrap());
    let mut config = DiagnosticConfig::new(&data_path);
    config.solve = true;
    let summary = run_diagnostic(&config, dir.path()).unwrap();
    assert_eq!(summary.classification, "heavy");
}
