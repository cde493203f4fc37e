//! `clipopt`: run clipped stochastic optimization experiments, inspect
//! gradient-noise tails, and check the library against its acceptance
//! criteria.
//!
//! Exit codes: 0 on success, 1 when a criterion or the computation fails,
//! 2 on usage and configuration errors.

use std::fmt;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use clipopt::experiment::{run_diagnostic, run_experiment, solve_and_cache, DiagnosticConfig, ExperimentConfig};
use clipopt::problems::{DEFAULT_REFERENCE_MAX_ITER, DEFAULT_REFERENCE_TOL};
use clipopt::verify::{run_criterion, verify_suite, Level, VerifyOptions, VerifyReport, CRITERIA, DATA_DIR_ENV, DEFAULT_SEED};

/// Environment variable naming the root under which runs are written when
/// neither the flag nor the config gives an output directory.
const OUTPUT_DIR_ENV: &str = "CLIPOPT_OUTPUT_DIR";
const DEFAULT_OUTPUT_ROOT: &str = "runs";

#[derive(Debug, Parser)]
#[command(name = "clipopt", version, about = "Clipped stochastic optimization under heavy-tailed noise")]
struct Cli {
    /// Worker threads for trial-level parallelism (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run an experiment described by a JSON config.
    Run(RunArgs),
    /// Histogram of per-sample gradient norms at the optimum of a dataset.
    Diagnose(DiagnoseArgs),
    /// Run the acceptance criteria and report pass/fail per criterion.
    Verify(VerifyArgs),
    /// Solve a logistic-regression dataset to high accuracy and cache x*.
    SolveReference(SolveArgs),
}

#[derive(Debug, Args)]
struct RunArgs {
    /// Experiment config (JSON).
    config: PathBuf,
    /// Run directory; overrides the config's `output_dir`.
    #[arg(long, short)]
    output_dir: Option<PathBuf>,
    #[arg(long)]
    trials: Option<usize>,
    /// Base seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Iteration budget; replaces any epoch budget in the config.
    #[arg(long, conflicts_with = "epochs")]
    iterations: Option<usize>,
    /// Budget in passes over the data; replaces any iteration budget.
    #[arg(long)]
    epochs: Option<f64>,
    /// Target accuracy for the restarted methods.
    #[arg(long)]
    epsilon: Option<f64>,
    /// Confidence level used by the schedules.
    #[arg(long)]
    beta: Option<f64>,
    /// Record every k-th iteration (the first and last are always kept).
    #[arg(long)]
    record_every: Option<usize>,
    /// Distance estimate ||x0 - x*|| for problems without a known optimum.
    #[arg(long)]
    radius: Option<f64>,
    /// Print the summary as JSON.
    #[arg(long)]
    json: bool,
}

#[derive(Debug, Args)]
struct DiagnoseArgs {
    /// LIBSVM dataset.
    dataset: PathBuf,
    /// Reference solution (default: the dataset's cache file).
    #[arg(long)]
    optimum: Option<PathBuf>,
    /// Solve for the optimum when no reference exists.
    #[arg(long)]
    solve: bool,
    #[arg(long, default_value_t = 50)]
    bins: usize,
    /// Gradient-norm tolerance used with `--solve`.
    #[arg(long, default_value_t = DEFAULT_REFERENCE_TOL)]
    tol: f64,
    #[arg(long, default_value_t = DEFAULT_REFERENCE_MAX_ITER)]
    max_iter: usize,
    #[arg(long, short)]
    output_dir: Option<PathBuf>,
    #[arg(long)]
    json: bool,
}

#[derive(Debug, Args)]
struct VerifyArgs {
    #[arg(long, default_value = "fast", value_parser = parse_level)]
    level: Level,
    /// Directory holding LIBSVM datasets (e.g. `heart`).
    #[arg(long, env = DATA_DIR_ENV)]
    data_dir: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    /// Run only these criteria (repeatable), regardless of level.
    #[arg(long = "only", value_name = "ID")]
    only: Vec<u8>,
    /// Print the machine-readable report instead of one line per criterion.
    #[arg(long)]
    json: bool,
}

#[derive(Debug, Args)]
struct SolveArgs {
    /// LIBSVM dataset.
    dataset: PathBuf,
    #[arg(long, default_value_t = DEFAULT_REFERENCE_TOL)]
    tol: f64,
    #[arg(long, default_value_t = DEFAULT_REFERENCE_MAX_ITER)]
    max_iter: usize,
    /// Where to write the reference (default: next to the dataset).
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_level(s: &str) -> Result<Level, String> {
    s.parse().map_err(|e: clipopt::Error| e.to_string())
}

/// A usage problem detected after argument parsing (exit code 2).
#[derive(Debug)]
struct UsageError(String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

/// Outcome of a command that ran to completion.
enum Outcome {
    Success,
    CriteriaFailed,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match dispatch(cli) {
        Ok(Outcome::Success) => ExitCode::SUCCESS,
        Ok(Outcome::CriteriaFailed) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    let usage = err.chain().any(|cause| {
        cause.is::<UsageError>()
            || matches!(
                cause.downcast_ref::<clipopt::Error>(),
                Some(clipopt::Error::Config { .. } | clipopt::Error::InvalidParameter { .. })
            )
    });
    if usage {
        2
    } else {
        1
    }
}

fn dispatch(cli: Cli) -> Result<Outcome> {
    if let Some(threads) = cli.threads {
        if threads == 0 {
            return Err(UsageError("--threads must be at least 1".into()).into());
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .context("configuring the worker pool")?;
    }
    match cli.command {
        Command::Run(args) => run(args),
        Command::Diagnose(args) => diagnose(args),
        Command::Verify(args) => verify(args),
        Command::SolveReference(args) => solve(args),
    }
}

/// Flag, then config, then `$CLIPOPT_OUTPUT_DIR/<name>`, then `runs/<name>`.
fn output_dir(flag: Option<PathBuf>, from_config: Option<PathBuf>, name: &str) -> PathBuf {
    flag.or(from_config).unwrap_or_else(|| {
        let root = std::env::var_os(OUTPUT_DIR_ENV).map_or_else(|| PathBuf::from(DEFAULT_OUTPUT_ROOT), PathBuf::from);
        root.join(name)
    })
}

fn file_stem(path: &Path) -> String {
    path.file_stem()
        .map_or_else(|| "run".to_string(), |s| s.to_string_lossy().into_owned())
}

fn load_config(args: &RunArgs) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(&args.config)
        .map_err(|e| UsageError(format!("cannot read config {}: {e}", args.config.display())))?;
    let mut config = ExperimentConfig::from_json_str(&text)?;
    if let Some(trials) = args.trials {
        config.trials = trials;
    }
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(n) = args.iterations {
        config.iterations = Some(n);
        config.epochs = None;
    }
    if let Some(e) = args.epochs {
        config.epochs = Some(e);
        config.iterations = None;
    }
    if let Some(eps) = args.epsilon {
        config.epsilon = Some(eps);
    }
    if let Some(beta) = args.beta {
        config.beta = beta;
    }
    if let Some(k) = args.record_every {
        config.record_every = k;
    }
    if let Some(r) = args.radius {
        if !(r > 0.0 && r.is_finite()) {
            return Err(UsageError(format!("--radius must be positive, got {r}")).into());
        }
        config.schedule.r0 = Some(r);
    }
    config.validate()?;
    Ok(config)
}

fn run(args: RunArgs) -> Result<Outcome> {
    let config = load_config(&args)?;
    let dir = output_dir(args.output_dir.clone(), config.output_dir.clone(), &file_stem(&args.config));
    let summary = run_experiment(&config, &dir)?;
    if args.json {
        println!("{}", serde_json::to_string_pretty(&summary)?);
    } else {
        println!(
            "{}: {} trials x {} iterations -> {}",
            summary.method,
            summary.trials,
            summary.iterations,
            dir.display()
        );
        for (level, gap) in summary.quantile_levels.iter().zip(&summary.output_gap_quantiles) {
            println!("  q{level:<4} f(x) - f* = {gap:.6e}");
        }
        if let Some(bound) = summary.bound {
            let within = summary.within_bound.unwrap_or(f64::NAN);
            println!("  bound {bound:.6e}, fraction within {within:.3}");
        }
        if summary.aborted_trials > 0 {
            println!("  {} trials aborted", summary.aborted_trials);
        }
    }
    Ok(Outcome::Success)
}

fn diagnose(args: DiagnoseArgs) -> Result<Outcome> {
    let config = DiagnosticConfig {
        dataset: args.dataset.clone(),
        optimum: args.optimum,
        solve: args.solve,
        bins: args.bins,
        tol: args.tol,
        max_iter: args.max_iter,
    };
    let dir = output_dir(args.output_dir, None, &format!("diagnose-{}", file_stem(&args.dataset)));
    let summary = run_diagnostic(&config, &dir).map_err(|e| match e {
        clipopt::Error::Precondition(reason) => anyhow::Error::new(UsageError(format!("{reason} (pass --solve)"))),
        other => other.into(),
    })?;
    if args.json {
        println!("{}", serde_json::to_string_pretty(&summary)?);
    } else {
        let score = &summary.report.score;
        println!(
            "{}: {} samples, sub-Gaussian score {:.4} (kappa {}), capped {:.4}, KS vs normal {:.4} -> {}",
            summary.dataset.display(),
            summary.report.samples,
            score.score,
            score.kappa,
            score.capped_fraction,
            summary.report.ks_fitted_normal,
            summary.classification
        );
        println!("  histogram written to {}", dir.display());
    }
    Ok(Outcome::Success)
}

fn verify(args: VerifyArgs) -> Result<Outcome> {
    let options = VerifyOptions {
        level: args.level,
        data_dir: args.data_dir,
        seed: args.seed,
    };
    let report = if args.only.is_empty() {
        verify_suite(&options)
    } else {
        for id in &args.only {
            if !CRITERIA.iter().any(|c| c.0 == *id) {
                return Err(UsageError(format!("unknown criterion {id} (valid: 1-{})", CRITERIA.len())).into());
            }
        }
        VerifyReport {
            level: options.level,
            version: env!("CARGO_PKG_VERSION").to_string(),
            seed: options.seed,
            criteria: args.only.iter().map(|&id| run_criterion(id, &options)).collect(),
        }
    };
    if args.json {
        println!("{}", report.to_json()?);
    } else {
        for criterion in &report.criteria {
            println!("{}", criterion.line());
        }
        println!("{} of {} criteria failed", report.failures(), report.criteria.len());
    }
    Ok(if report.all_passed() {
        Outcome::Success
    } else {
        Outcome::CriteriaFailed
    })
}

fn solve(args: SolveArgs) -> Result<Outcome> {
    let (reference, path) = solve_and_cache(&args.dataset, args.tol, args.max_iter, args.out.as_deref())?;
    println!(
        "f* = {:.12e}, ||grad f|| = {:.3e} after {} iterations -> {}",
        reference.f_star,
        reference.grad_norm,
        reference.iterations,
        path.display()
    );
    Ok(Outcome::Success)
}
