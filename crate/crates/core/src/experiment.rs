//! Declarative experiment runs.
//!
//! An [`ExperimentConfig`] names one problem, one method and a schedule
//! policy. [`run_experiment`] resolves the schedule, runs the trials in
//! parallel on independent RNG streams and writes a run directory:
//!
//! ```text
//! trials/trial_0000.csv         trajectory (schema: Trajectory::CSV_HEADER)
//! trials/trial_0000.json        seed, stream id and per-trial outcome
//! quantiles.csv                 per-checkpoint f_gap quantiles across trials
//! provenance.json               config, problem constants, resolved schedule
//! summary.json                  ensemble summary
//! gap_vs_iterations.svg         quantile curves, log-scale f_gap
//! gap_vs_calls.svg
//! ```
//!
//! Every output depends only on the config, so reruns are byte-identical.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::diagnostics::{
    ensemble_quantiles, gradient_norm_histogram, ks_against_fitted_normal, oscillation_metric,
    subgaussian_diagnostic, EnsembleStats, SubGaussianScore, TailHistogram,
};
use crate::error::{Error, Result};
use crate::linalg::Vector;
use crate::noise::{NoiseFamily, NoiseModel};
use crate::optimizers::{run_sgd, run_sstm, Abort, Trajectory};
use crate::oracle::StochasticOracle;
use crate::problems::{
    load_libsvm, make_logreg, make_toy, optimum_cache_path, solve_reference, LogisticRegressionProblem,
    QuadraticToyProblem, ReferenceSolution,
};
use crate::restarts::{run_restarted_sgd, run_restarted_sstm, RestartSummary};
use crate::rng::RngStream;
use crate::schedules::{
    restart_plan_sgd, restart_plan_sstm, sgd_strongly_convex_params, sgd_theorem_params,
    small_batch_restart_params, sstm_batch_policy, BatchPolicy, BatchSchedule, ClipPolicy, RestartMethod,
    RestartPlan, SgdSchedule, SmallBatchThetas, SstmSchedule, TheoremConstants,
};
use crate::svg::{histogram_svg, LinePlot, Series};

/// Tail window used for the per-trial oscillation metric.
pub const OSCILLATION_TAIL: f64 = 0.25;

// ---------------------------------------------------------------------------
// Config
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseKind {
    #[default]
    None,
    Gaussian,
    Weibull,
    Burr,
}

impl NoiseKind {
    pub fn family(self) -> Option<NoiseFamily> {
        match self {
            NoiseKind::None => None,
            NoiseKind::Gaussian => Some(NoiseFamily::Gaussian),
            NoiseKind::Weibull => Some(NoiseFamily::weibull()),
            NoiseKind::Burr => Some(NoiseFamily::burr()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ProblemSpec {
    /// `f(x) = ||x||^2 / 2` with additive unit-variance noise per coordinate.
    Toy {
        n: usize,
        #[serde(default)]
        noise: NoiseKind,
    },
    /// Logistic regression on a LIBSVM file. `optimum` defaults to the cache
    /// written by `solve-reference` next to the dataset, when present.
    Logreg {
        path: PathBuf,
        #[serde(default)]
        optimum: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Sgd,
    ClippedSgd,
    DClippedSgd,
    Sstm,
    ClippedSstm,
    RClippedSstm,
    RClippedSgd,
    ScClippedSgd,
}

impl Method {
    pub const ALL: [Method; 8] = [
        Method::Sgd,
        Method::ClippedSgd,
        Method::DClippedSgd,
        Method::Sstm,
        Method::ClippedSstm,
        Method::RClippedSstm,
        Method::RClippedSgd,
        Method::ScClippedSgd,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Sgd => "sgd",
            Method::ClippedSgd => "clipped-sgd",
            Method::DClippedSgd => "d-clipped-sgd",
            Method::Sstm => "sstm",
            Method::ClippedSstm => "clipped-sstm",
            Method::RClippedSstm => "r-clipped-sstm",
            Method::RClippedSgd => "r-clipped-sgd",
            Method::ScClippedSgd => "sc-clipped-sgd",
        }
    }

    pub fn is_restarted(self) -> bool {
        matches!(self, Method::RClippedSstm | Method::RClippedSgd)
    }

    fn default_policy(self) -> Policy {
        match self {
            Method::DClippedSgd => Policy::Manual,
            _ => Policy::Theorem,
        }
    }

    fn allowed_policies(self) -> &'static [Policy] {
        use Policy::*;
        match self {
            Method::Sgd | Method::ClippedSgd => &[Theorem, Manual],
            Method::DClippedSgd => &[Manual],
            Method::Sstm | Method::ClippedSstm => &[Theorem, Manual, MediumBatch, ConstantBatch, Combined],
            Method::RClippedSstm => &[Theorem, SmallBatch],
            Method::RClippedSgd | Method::ScClippedSgd => &[Theorem],
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// How the schedule is produced. `theorem` and the batch policies derive
/// every parameter from the problem constants; `manual` takes them from the
/// config (the tuned values of the logistic-regression experiments).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Policy {
    Theorem,
    Manual,
    MediumBatch,
    ConstantBatch,
    Combined,
    SmallBatch,
}

/// Schedule policy plus overrides. Under a derived policy any override
/// replaces the corresponding derived value; under `manual` they are the
/// schedule.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScheduleSpec {
    pub policy: Option<Policy>,
    pub gamma: Option<f64>,
    /// Stepsize as a multiple of `1/L` (`0.5` means `gamma = 1/(2L)`).
    pub gamma_over_l: Option<f64>,
    pub lambda: Option<f64>,
    pub b: Option<f64>,
    pub a: Option<f64>,
    pub m: Option<usize>,
    pub a0: Option<f64>,
    pub lambda0: Option<f64>,
    /// d-clipped-SGD decay period in iterations.
    pub period: Option<usize>,
    /// d-clipped-SGD decay period in epochs (logistic regression only).
    pub period_epochs: Option<usize>,
    pub alpha_dec: Option<f64>,
    /// Initial radius `||x0 - x*||` (initial gap `f(x0) - f*` for
    /// sc-clipped-sgd). Defaults to the value at the known optimum.
    pub r0: Option<f64>,
    pub practical_scale: Option<f64>,
    pub theta_a: Option<f64>,
    pub theta_n: Option<f64>,
}

impl ScheduleSpec {
    fn set_fields(&self) -> Vec<&'static str> {
        let mut out = Vec::new();
        macro_rules! push {
            ($($f:ident),*) => { $( if self.$f.is_some() { out.push(stringify!($f)); } )* };
        }
        push!(
            gamma,
            gamma_over_l,
            lambda,
            b,
            a,
            m,
            a0,
            lambda0,
            period,
            period_epochs,
            alpha_dec,
            r0,
            practical_scale,
            theta_a,
            theta_n
        );
        out
    }
}

/// Starting point: a constant fill or explicit coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum StartPoint {
    Fill(f64),
    Values(Vec<f64>),
}

fn default_beta() -> f64 {
    0.1
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub problem: ProblemSpec,
    pub method: Method,
    #[serde(default)]
    pub schedule: ScheduleSpec,
    /// Iteration budget `N` (per run; non-restarted methods).
    #[serde(default)]
    pub iterations: Option<usize>,
    /// Budget in passes over the data: `N = ceil(epochs r / m)`.
    #[serde(default)]
    pub epochs: Option<f64>,
    /// Target accuracy (restarted methods).
    #[serde(default)]
    pub epsilon: Option<f64>,
    #[serde(default = "default_beta")]
    pub beta: f64,
    /// Defaults to all ones for the toy problem and zeros for data problems.
    #[serde(default)]
    pub x0: Option<StartPoint>,
    #[serde(default = "one")]
    pub trials: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default = "one")]
    pub record_every: usize,
}

impl ExperimentConfig {
    /// A config with the defaults for everything but problem and method.
    pub fn new(problem: ProblemSpec, method: Method) -> Self {
        ExperimentConfig {
            problem,
            method,
            schedule: ScheduleSpec::default(),
            iterations: None,
            epochs: None,
            epsilon: None,
            beta: default_beta(),
            x0: None,
            trials: 1,
            seed: 0,
            output_dir: None,
            record_every: 1,
        }
    }

    /// Parses and validates a JSON config; errors name the offending field.
    pub fn from_json_str(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let config: ExperimentConfig = serde_path_to_error::deserialize(de)
            .map_err(|e| Error::config(e.path().to_string(), e.inner().to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json_str(&text)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn policy(&self) -> Policy {
        self.schedule.policy.unwrap_or(self.method.default_policy())
    }

    /// Structural validation: one budget, overrides that apply to the
    /// method and policy. Numeric ranges are checked when the schedule is
    /// resolved.
    pub fn validate(&self) -> Result<()> {
        let method = self.method;
        let policy = self.policy();
        let is_logreg = matches!(self.problem, ProblemSpec::Logreg { .. });
        if let ProblemSpec::Toy { n: 0, .. } = self.problem {
            return Err(Error::config("problem.n", "dimension must be at least 1"));
        }
        if !method.allowed_policies().contains(&policy) {
            return Err(Error::config(
                "schedule.policy",
                format!("policy {policy:?} does not apply to {method}"),
            ));
        }
        for field in self.schedule.set_fields() {
            if !field_applies(field, method, policy) {
                return Err(Error::config(
                    format!("schedule.{field}"),
                    format!("not applicable to {method} with policy {policy:?}"),
                ));
            }
        }
        if self.schedule.gamma.is_some() && self.schedule.gamma_over_l.is_some() {
            return Err(Error::config("schedule.gamma_over_l", "give either gamma or gamma_over_l"));
        }
        if self.schedule.period.is_some() && self.schedule.period_epochs.is_some() {
            return Err(Error::config("schedule.period_epochs", "give either period or period_epochs"));
        }
        if self.schedule.period_epochs.is_some() && !is_logreg {
            return Err(Error::config("schedule.period_epochs", "epochs need a finite-sum problem"));
        }
        if method.is_restarted() {
            if self.epsilon.is_none() {
                return Err(Error::config("epsilon", format!("{method} needs a target accuracy")));
            }
            if self.iterations.is_some() || self.epochs.is_some() {
                return Err(Error::config(
                    "iterations",
                    format!("{method} derives its iteration counts from epsilon"),
                ));
            }
        } else {
            if self.epsilon.is_some() {
                return Err(Error::config("epsilon", "only restarted methods take a target accuracy"));
            }
            match (self.iterations, self.epochs) {
                (None, None) => return Err(Error::config("iterations", "an iteration budget is required")),
                (Some(_), Some(_)) => return Err(Error::config("epochs", "give either iterations or epochs")),
                (Some(0), _) => return Err(Error::config("iterations", "must be at least 1")),
                (_, Some(e)) if !is_logreg => {
                    let _ = e;
                    return Err(Error::config("epochs", "epochs need a finite-sum problem"));
                }
                (_, Some(e)) if !(e > 0.0 && e.is_finite()) => {
                    return Err(Error::config("epochs", "must be positive"))
                }
                _ => {}
            }
        }
        if !(self.beta > 0.0 && self.beta < 1.0) {
            return Err(Error::config("beta", "must lie in (0, 1)"));
        }
        if self.trials == 0 {
            return Err(Error::config("trials", "must be at least 1"));
        }
        if self.record_every == 0 {
            return Err(Error::config("record_every", "must be at least 1"));
        }
        if let Some(StartPoint::Values(v)) = &self.x0 {
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::config("x0", "entries must be finite"));
            }
        }
        Ok(())
    }
}

fn field_applies(field: &str, method: Method, policy: Policy) -> bool {
    use Method::*;
    let derived = policy != Policy::Manual;
    match field {
        "gamma" | "gamma_over_l" => matches!(method, Sgd | ClippedSgd | DClippedSgd),
        "lambda" => method == ClippedSgd,
        "lambda0" | "alpha_dec" | "period" | "period_epochs" => method == DClippedSgd,
        "a" => matches!(method, Sstm | ClippedSstm),
        "b" => method == ClippedSstm,
        "m" => matches!(method, Sgd | ClippedSgd | DClippedSgd | Sstm | ClippedSstm),
        "a0" => matches!(method, Sstm | ClippedSstm) && policy == Policy::ConstantBatch,
        "theta_a" | "theta_n" => method == RClippedSstm && policy == Policy::SmallBatch,
        "r0" | "practical_scale" => derived,
        _ => false,
    }
}

// ---------------------------------------------------------------------------
// Problem and schedule resolution
// ---------------------------------------------------------------------------

/// A constructed problem instance.
#[derive(Debug, Clone)]
pub enum Problem {
    Toy(QuadraticToyProblem),
    Logreg {
        problem: LogisticRegressionProblem,
        path: PathBuf,
        /// Where `x*` came from, if known.
        optimum_source: Option<PathBuf>,
    },
}

impl Problem {
    pub fn oracle(&self) -> &dyn StochasticOracle {
        match self {
            Problem::Toy(p) => p,
            Problem::Logreg { problem, .. } => problem,
        }
    }

    /// Number of component functions for finite sums.
    pub fn samples(&self) -> Option<usize> {
        match self {
            Problem::Toy(_) => None,
            Problem::Logreg { problem, .. } => Some(problem.len()),
        }
    }
}

pub fn build_problem(spec: &ProblemSpec) -> Result<Problem> {
    match spec {
        ProblemSpec::Toy { n, noise } => {
            let model = noise.family().map(|f| NoiseModel::new(f, *n)).transpose()?;
            Ok(Problem::Toy(make_toy(*n, model)?))
        }
        ProblemSpec::Logreg { path, optimum } => {
            let mut problem = make_logreg(load_libsvm(path)?)?;
            let source = match optimum {
                Some(p) => Some(p.clone()),
                None => Some(optimum_cache_path(path)).filter(|p| p.exists()),
            };
            if let Some(src) = &source {
                let reference = ReferenceSolution::load(src)?;
                problem = problem.with_optimum(reference.optimum())?;
            }
            Ok(Problem::Logreg {
                problem,
                path: path.clone(),
                optimum_source: source,
            })
        }
    }
}

pub fn resolve_start(config: &ExperimentConfig, problem: &Problem) -> Result<Vector> {
    let n = problem.oracle().dimension();
    let default_fill = match problem {
        Problem::Toy(_) => 1.0,
        Problem::Logreg { .. } => 0.0,
    };
    match &config.x0 {
        None => Ok(Vector::filled(n, default_fill)),
        Some(StartPoint::Fill(v)) if v.is_finite() => Ok(Vector::filled(n, *v)),
        Some(StartPoint::Fill(_)) => Err(Error::config("x0", "fill value must be finite")),
        Some(StartPoint::Values(v)) if v.len() == n => Ok(Vector::from_vec(v.clone())),
        Some(StartPoint::Values(v)) => Err(Error::config(
            "x0",
            format!("expected {n} coordinates, got {}", v.len()),
        )),
    }
}

/// The schedule a run executes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ResolvedSchedule {
    Sgd(SgdSchedule),
    Sstm(SstmSchedule),
    Restart(RestartPlan),
}

impl ResolvedSchedule {
    /// The theorem's guarantee for the method output, when one applies.
    pub fn bound(&self) -> Option<f64> {
        match self {
            ResolvedSchedule::Sgd(s) => s.bound(),
            ResolvedSchedule::Sstm(s) => s.bound(),
            ResolvedSchedule::Restart(p) => Some(p.epsilon),
        }
    }

    /// Total iterations across restarts.
    pub fn iterations(&self) -> usize {
        match self {
            ResolvedSchedule::Sgd(s) => s.n,
            ResolvedSchedule::Sstm(s) => s.n,
            ResolvedSchedule::Restart(p) => p.n0 * p.tau,
        }
    }

    pub fn unclipped(&self) -> Self {
        match self {
            ResolvedSchedule::Sgd(s) => ResolvedSchedule::Sgd(s.unclipped()),
            ResolvedSchedule::Sstm(s) => ResolvedSchedule::Sstm(s.unclipped()),
            ResolvedSchedule::Restart(p) => ResolvedSchedule::Restart(p.unclipped()),
        }
    }
}

/// Problem constants the schedule was derived from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduleInputs {
    pub smoothness: f64,
    pub strong_convexity: f64,
    pub variance_bound: f64,
    pub iterations: Option<usize>,
    pub r0: Option<f64>,
    pub initial_gap: Option<f64>,
    pub beta: f64,
    pub epsilon: Option<f64>,
    pub practical_scale: f64,
    pub overrides: Vec<String>,
}

fn iteration_budget(config: &ExperimentConfig, problem: &Problem) -> Result<usize> {
    match (config.iterations, config.epochs, problem.samples()) {
        (Some(n), _, _) => Ok(n),
        (None, Some(e), Some(r)) => {
            let m = config.schedule.m.unwrap_or(1) as f64;
            Ok(((e * r as f64) / m).ceil().max(1.0) as usize)
        }
        _ => Err(Error::config("iterations", "an iteration budget is required")),
    }
}

fn required<T: Copy>(value: Option<T>, field: &str, method: Method) -> Result<T> {
    value.ok_or_else(|| Error::config(format!("schedule.{field}"), format!("required for manual {method}")))
}

/// Derives the schedule for `config` on `problem` starting at `x0`.
pub fn resolve_schedule(
    config: &ExperimentConfig,
    problem: &Problem,
    x0: &[f64],
) -> Result<(ResolvedSchedule, ScheduleInputs)> {
    config.validate()?;
    let oracle = problem.oracle();
    let spec = &config.schedule;
    let method = config.method;
    let policy = config.policy();
    let l = oracle.smoothness();
    let mu = oracle.strong_convexity();
    let sigma_sq = oracle.variance_bound();
    let consts = TheoremConstants {
        practical_scale: spec.practical_scale.unwrap_or(1.0),
    };
    let initial_gap = oracle.gap(x0);
    let mut inputs = ScheduleInputs {
        smoothness: l,
        strong_convexity: mu,
        variance_bound: sigma_sq,
        iterations: None,
        r0: None,
        initial_gap,
        beta: config.beta,
        epsilon: config.epsilon,
        practical_scale: consts.practical_scale,
        overrides: Vec::new(),
    };
    let radius = || -> Result<f64> {
        spec.r0
            .or_else(|| oracle.distance_to_optimum(x0))
            .ok_or_else(|| Error::config("schedule.r0", "no known optimum; set r0 or provide an optimum"))
    };
    let gamma = spec.gamma.or(spec.gamma_over_l.map(|g| g / l));
    let needs_mu = matches!(method, Method::RClippedSstm | Method::RClippedSgd | Method::ScClippedSgd);
    if needs_mu && !(mu > 0.0) {
        return Err(Error::config("method", format!("{method} needs a strongly convex problem")));
    }

    let schedule = match method {
        Method::Sgd | Method::ClippedSgd | Method::DClippedSgd => {
            let n = iteration_budget(config, problem)?;
            inputs.iterations = Some(n);
            let clipped = method != Method::Sgd;
            let mut s = match (method, policy) {
                (Method::DClippedSgd, _) => {
                    let m = spec.m.unwrap_or(1);
                    let period = match (spec.period, spec.period_epochs, problem.samples()) {
                        (Some(p), _, _) => p,
                        (None, Some(e), Some(r)) => crate::schedules::d_clipped_period(r, e, m)?,
                        _ => return Err(Error::config("schedule.period", "required for d-clipped-sgd")),
                    };
                    SgdSchedule::d_clipped(
                        required(gamma, "gamma", method)?,
                        required(spec.lambda0, "lambda0", method)?,
                        period,
                        required(spec.alpha_dec, "alpha_dec", method)?,
                        m,
                        n,
                    )?
                }
                (_, Policy::Manual) => {
                    let lambda = if clipped {
                        required(spec.lambda, "lambda", method)?
                    } else {
                        f64::INFINITY
                    };
                    SgdSchedule::manual(required(gamma, "gamma", method)?, lambda, spec.m.unwrap_or(1), n)?
                }
                _ => {
                    let r0 = radius()?;
                    inputs.r0 = Some(r0);
                    let mut s = sgd_theorem_params(l, sigma_sq, r0, n, config.beta, &consts)?;
                    if !clipped {
                        s = s.unclipped();
                    }
                    if let Some(g) = gamma {
                        s.gamma = g;
                        inputs.overrides.push("gamma".into());
                    }
                    if let Some(lambda) = spec.lambda {
                        s.clip = ClipPolicy::Constant { lambda };
                        inputs.overrides.push("lambda".into());
                    }
                    if let Some(m) = spec.m {
                        s.batches = BatchSchedule::Constant(m);
                        inputs.overrides.push("m".into());
                    }
                    s
                }
            };
            if !inputs.overrides.is_empty() {
                s.provenance = format!("{} with overrides: {}", s.provenance, inputs.overrides.join(", "));
            }
            s.validate()?;
            ResolvedSchedule::Sgd(s)
        }
        Method::Sstm | Method::ClippedSstm => {
            let n = iteration_budget(config, problem)?;
            inputs.iterations = Some(n);
            let clipped = method == Method::ClippedSstm;
            let mut s = if policy == Policy::Manual {
                let b = if clipped {
                    required(spec.b, "b", method)?
                } else {
                    f64::INFINITY
                };
                SstmSchedule::manual(required(spec.a, "a", method)?, l, b, n, spec.m.unwrap_or(1))?
            } else {
                let r0 = radius()?;
                inputs.r0 = Some(r0);
                let bp = match policy {
                    Policy::MediumBatch => BatchPolicy::MediumBatch,
                    Policy::ConstantBatch => BatchPolicy::ConstantBatch { a0: spec.a0 },
                    Policy::Combined => BatchPolicy::Combined,
                    _ => BatchPolicy::TheoremExact,
                };
                let mut s = sstm_batch_policy(bp, l, sigma_sq, r0, n, config.beta, &consts)?;
                if !clipped {
                    s = s.unclipped();
                }
                if let Some(a) = spec.a {
                    s.a = a;
                    inputs.overrides.push("a".into());
                }
                if let Some(b) = spec.b {
                    s.b = b;
                    inputs.overrides.push("b".into());
                }
                if let Some(m) = spec.m {
                    s.batches = BatchSchedule::Constant(m);
                    inputs.overrides.push("m".into());
                }
                s
            };
            if !inputs.overrides.is_empty() {
                s.provenance = format!("{} with overrides: {}", s.provenance, inputs.overrides.join(", "));
            }
            s.validate()?;
            ResolvedSchedule::Sstm(s)
        }
        Method::RClippedSstm | Method::RClippedSgd => {
            let r = radius()?;
            inputs.r0 = Some(r);
            let eps = config.epsilon.expect("validated");
            let plan = match (method, policy) {
                (Method::RClippedSstm, Policy::SmallBatch) => {
                    let thetas = SmallBatchThetas {
                        theta_a: spec.theta_a.unwrap_or(1.0),
                        theta_n: spec.theta_n.unwrap_or(1.0),
                    };
                    small_batch_restart_params(l, mu, sigma_sq, eps, config.beta, r, thetas, &consts)?
                }
                (Method::RClippedSstm, _) => restart_plan_sstm(l, mu, sigma_sq, r, eps, config.beta, &consts)?,
                _ => restart_plan_sgd(l, mu, sigma_sq, r, eps, config.beta, &consts)?,
            };
            ResolvedSchedule::Restart(plan)
        }
        Method::ScClippedSgd => {
            let n = iteration_budget(config, problem)?;
            inputs.iterations = Some(n);
            let r0 = spec
                .r0
                .or(initial_gap)
                .ok_or_else(|| Error::config("schedule.r0", "no known optimum; set r0 to the initial gap"))?;
            inputs.r0 = Some(r0);
            ResolvedSchedule::Sgd(sgd_strongly_convex_params(l, mu, sigma_sq, r0, n, config.beta, &consts)?)
        }
    };
    Ok((schedule, inputs))
}

// ---------------------------------------------------------------------------
// Trials
// ---------------------------------------------------------------------------

/// Everything one trial produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub trajectory: Trajectory,
    /// The method's output point.
    pub output: Vector,
    pub output_gap: Option<f64>,
    pub calls: u64,
    pub clip_activations: u64,
    pub restarts: Option<Vec<RestartSummary>>,
}

/// Runs one trial of `schedule` from `x0` on `rng`.
pub fn run_trial<O: StochasticOracle + ?Sized>(
    oracle: &O,
    schedule: &ResolvedSchedule,
    x0: &[f64],
    rng: &mut RngStream,
    record_every: usize,
) -> Result<TrialResult> {
    match schedule {
        ResolvedSchedule::Sgd(s) => {
            let run = run_sgd(oracle, s, x0, rng, record_every)?;
            Ok(TrialResult {
                output_gap: if run.aborted() { None } else { oracle.gap(&run.x) },
                output: run.x,
                trajectory: run.trajectory,
                calls: run.calls,
                clip_activations: run.clip_activations,
                restarts: None,
            })
        }
        ResolvedSchedule::Sstm(s) => {
            let run = run_sstm(oracle, s, x0, rng, record_every)?;
            Ok(TrialResult {
                output_gap: if run.aborted() { None } else { oracle.gap(&run.x) },
                output: run.x,
                trajectory: run.trajectory,
                calls: run.calls,
                clip_activations: run.clip_activations,
                restarts: None,
            })
        }
        ResolvedSchedule::Restart(plan) => {
            let out = match plan.method {
                RestartMethod::Sstm => run_restarted_sstm(oracle, plan, x0, rng, record_every)?,
                RestartMethod::Sgd => run_restarted_sgd(oracle, plan, x0, rng, record_every)?,
            };
            let trajectory = out.merged_trajectory(plan.n0);
            let clip_activations = trajectory.last().map_or(0, |r| r.clipped);
            Ok(TrialResult {
                output_gap: if out.aborted.is_some() { None } else { oracle.gap(&out.x) },
                output: out.x,
                trajectory,
                calls: out.calls,
                clip_activations,
                restarts: Some(out.summaries),
            })
        }
    }
}

/// Runs `trials` independent trials in parallel; trial `i` uses
/// `RngStream::for_trial(seed, i)`, so results do not depend on scheduling.
pub fn run_trials<O: StochasticOracle + ?Sized>(
    oracle: &O,
    schedule: &ResolvedSchedule,
    x0: &[f64],
    seed: u64,
    trials: usize,
    record_every: usize,
) -> Result<Vec<TrialResult>> {
    (0..trials)
        .into_par_iter()
        .map(|i| {
            let mut rng = RngStream::for_trial(seed, i as u64);
            run_trial(oracle, schedule, x0, &mut rng, record_every)
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Run directory
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialSummary {
    pub trial: usize,
    pub seed: u64,
    pub stream_id: u64,
    pub output_gap: Option<f64>,
    pub final_record_gap: Option<f64>,
    pub calls: u64,
    pub clip_activations: u64,
    pub oscillation: Option<f64>,
    pub aborted: Option<Abort>,
    pub restarts: Option<Vec<RestartSummary>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSummary {
    pub method: Method,
    pub trials: usize,
    pub aborted_trials: usize,
    pub iterations: usize,
    pub bound: Option<f64>,
    pub quantile_levels: Vec<f64>,
    /// Quantiles of the output gap at `quantile_levels`.
    pub output_gap_quantiles: Vec<f64>,
    /// Fraction of trials whose output gap is within `bound`.
    pub within_bound: Option<f64>,
    /// Not serialized: `summary.json` lives in this directory, and leaving
    /// the path out keeps reruns elsewhere byte-identical.
    #[serde(skip)]
    pub output_dir: PathBuf,
    pub per_trial: Vec<TrialSummary>,
}

/// `0.5, 0.9, 1 - beta`, sorted and deduplicated.
pub fn quantile_levels(beta: f64) -> Vec<f64> {
    let mut levels = vec![0.5, 0.9, 1.0 - beta];
    levels.sort_by(f64::total_cmp);
    levels.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
    levels
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

/// Runs the experiment and writes the run directory under `out_dir`.
pub fn run_experiment(config: &ExperimentConfig, out_dir: &Path) -> Result<ExperimentSummary> {
    config.validate()?;
    let problem = build_problem(&config.problem)?;
    let oracle = problem.oracle();
    let x0 = resolve_start(config, &problem)?;
    let (schedule, inputs) = resolve_schedule(config, &problem, &x0)?;
    let results = run_trials(oracle, &schedule, &x0, config.seed, config.trials, config.record_every)?;

    let trials_dir = out_dir.join("trials");
    create_dir(&trials_dir)?;
    let mut per_trial = Vec::with_capacity(results.len());
    for (i, r) in results.iter().enumerate() {
        let stream_id = RngStream::for_trial(config.seed, i as u64).stream_id();
        let gaps = r.trajectory.f_gaps();
        let oscillation = if gaps.iter().all(|g| g.is_finite()) && r.trajectory.aborted.is_none() {
            oscillation_metric(&gaps, OSCILLATION_TAIL).ok()
        } else {
            None
        };
        let summary = TrialSummary {
            trial: i,
            seed: config.seed,
            stream_id,
            output_gap: r.output_gap,
            final_record_gap: r.trajectory.last().and_then(|rec| rec.f_gap),
            calls: r.calls,
            clip_activations: r.clip_activations,
            oscillation,
            aborted: r.trajectory.aborted.clone(),
            restarts: r.restarts.clone(),
        };
        r.trajectory.write_csv(&trials_dir.join(format!("trial_{i:04}.csv")))?;
        write(
            &trials_dir.join(format!("trial_{i:04}.json")),
            &serde_json::to_string_pretty(&summary)?,
        )?;
        per_trial.push(summary);
    }

    let levels = quantile_levels(config.beta);
    let trajectories: Vec<Trajectory> = results.iter().map(|r| r.trajectory.clone()).collect();
    let has_gaps = trajectories
        .iter()
        .all(|t| t.records.iter().all(|r| r.f_gap.is_some()));
    let stats = if has_gaps {
        let stats = ensemble_quantiles(&trajectories, &levels)?;
        write(&out_dir.join("quantiles.csv"), &stats.to_csv())?;
        write_plots(out_dir, &stats, &trajectories, config)?;
        Some(stats)
    } else {
        None
    };

    let bound = schedule.bound();
    let mut output_gaps: Vec<f64> = results
        .iter()
        .map(|r| r.output_gap.unwrap_or(f64::INFINITY))
        .collect();
    output_gaps.sort_by(f64::total_cmp);
    let output_gap_quantiles = if has_gaps {
        levels
            .iter()
            .map(|&p| crate::diagnostics::quantile_sorted(&output_gaps, p))
            .collect()
    } else {
        Vec::new()
    };
    let within_bound = bound.filter(|_| has_gaps).map(|b| {
        output_gaps.iter().filter(|&&g| g <= b).count() as f64 / results.len() as f64
    });

    let provenance = serde_json::json!({
        "library": "clipopt-core",
        "version": env!("CARGO_PKG_VERSION"),
        "config": config,
        "problem": problem_provenance(&problem),
        "inputs": inputs,
        "x0": x0,
        "schedule": schedule,
        "seeds": {
            "base_seed": config.seed,
            "stream_ids": per_trial.iter().map(|t| t.stream_id).collect::<Vec<_>>(),
            "derivation": "ChaCha8 keyed by base seed; trial i uses stream mix(i); restart t forks stream mix(id ^ mix(t + golden))",
        },
        "quantile_levels": levels,
    });
    write(&out_dir.join("provenance.json"), &serde_json::to_string_pretty(&provenance)?)?;

    let summary = ExperimentSummary {
        method: config.method,
        trials: results.len(),
        aborted_trials: stats
            .as_ref()
            .map_or_else(|| per_trial.iter().filter(|t| t.aborted.is_some()).count(), |s| s.aborted_trials),
        iterations: schedule.iterations(),
        bound,
        quantile_levels: levels,
        output_gap_quantiles,
        within_bound,
        output_dir: out_dir.to_path_buf(),
        per_trial,
    };
    write(&out_dir.join("summary.json"), &serde_json::to_string_pretty(&summary)?)?;
    Ok(summary)
}

fn problem_provenance(problem: &Problem) -> serde_json::Value {
    let o = problem.oracle();
    let base = serde_json::json!({
        "dimension": o.dimension(),
        "smoothness": o.smoothness(),
        "strong_convexity": o.strong_convexity(),
        "variance_bound": o.variance_bound(),
        "f_star": o.optimum().map(|opt| opt.value),
    });
    let mut obj = base.as_object().cloned().unwrap_or_default();
    match problem {
        Problem::Toy(t) => {
            obj.insert("kind".into(), "toy".into());
            obj.insert(
                "noise".into(),
                serde_json::to_value(t.noise()).unwrap_or(serde_json::Value::Null),
            );
        }
        Problem::Logreg {
            problem,
            path,
            optimum_source,
        } => {
            obj.insert("kind".into(), "logreg".into());
            obj.insert("samples".into(), problem.len().into());
            obj.insert("path".into(), path.display().to_string().into());
            obj.insert(
                "optimum_source".into(),
                optimum_source.as_ref().map(|p| p.display().to_string()).into(),
            );
        }
    }
    serde_json::Value::Object(obj)
}

fn write_plots(
    out_dir: &Path,
    stats: &EnsembleStats,
    trajectories: &[Trajectory],
    config: &ExperimentConfig,
) -> Result<()> {
    let title = format!("{} ({} trials)", config.method, trajectories.len());
    let calls: Vec<f64> = trajectories
        .iter()
        .max_by_key(|t| t.len())
        .map(|t| t.records.iter().map(|r| r.calls as f64).collect())
        .unwrap_or_default();
    let series_over = |xs: &dyn Fn(usize) -> f64| -> Vec<Series> {
        stats
            .levels
            .iter()
            .zip(&stats.quantiles)
            .map(|(l, q)| Series {
                name: format!("q{l}"),
                points: q.iter().enumerate().map(|(c, &v)| (xs(c), v)).collect(),
            })
            .collect()
    };
    let by_iter = LinePlot {
        title: title.clone(),
        x_label: "iteration".into(),
        y_label: "f(x) - f*".into(),
        log_y: true,
        series: series_over(&|c| stats.checkpoints[c] as f64),
    };
    write(&out_dir.join("gap_vs_iterations.svg"), &by_iter.render())?;
    let by_calls = LinePlot {
        title,
        x_label: "oracle calls".into(),
        y_label: "f(x) - f*".into(),
        log_y: true,
        series: series_over(&|c| calls.get(c).copied().unwrap_or(f64::NAN)),
    };
    write(&out_dir.join("gap_vs_calls.svg"), &by_calls.render())
}

// ---------------------------------------------------------------------------
// Reference solutions and tail diagnostics
// ---------------------------------------------------------------------------

/// Solves a LIBSVM logistic-regression problem to `tol` and writes the
/// reference to `out` (default: the dataset's cache path).
pub fn solve_and_cache(
    dataset: &Path,
    tol: f64,
    max_iter: usize,
    out: Option<&Path>,
) -> Result<(ReferenceSolution, PathBuf)> {
    let problem = make_logreg(load_libsvm(dataset)?)?;
    let x0 = Vector::zeros(problem.data().dimension);
    let reference = solve_reference(&problem, &x0, tol, max_iter)?.require_converged()?;
    let path = out.map_or_else(|| optimum_cache_path(dataset), Path::to_path_buf);
    reference.save(&path)?;
    Ok((reference, path))
}

/// Gradient-norm tail statistics of a finite-sum problem at `x`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailReport {
    pub samples: usize,
    pub histogram: TailHistogram,
    pub score: SubGaussianScore,
    pub ks_fitted_normal: f64,
}

pub fn tail_report(problem: &LogisticRegressionProblem, x: &[f64], bins: usize) -> Result<TailReport> {
    let histogram = gradient_norm_histogram(problem, x, bins)?;
    let norms = problem.component_gradient_norms(x, false);
    Ok(TailReport {
        samples: norms.len(),
        score: subgaussian_diagnostic(&norms)?,
        ks_fitted_normal: ks_against_fitted_normal(&norms)?,
        histogram,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticConfig {
    pub dataset: PathBuf,
    /// Reference solution; defaults to the dataset's cache path.
    pub optimum: Option<PathBuf>,
    /// Solve (and cache) the reference when none exists.
    pub solve: bool,
    pub bins: usize,
    pub tol: f64,
    pub max_iter: usize,
}

impl DiagnosticConfig {
    pub fn new(dataset: impl Into<PathBuf>) -> Self {
        DiagnosticConfig {
            dataset: dataset.into(),
            optimum: None,
            solve: false,
            bins: 50,
            tol: crate::problems::DEFAULT_REFERENCE_TOL,
            max_iter: crate::problems::DEFAULT_REFERENCE_MAX_ITER,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticSummary {
    pub dataset: PathBuf,
    pub optimum_source: PathBuf,
    pub f_star: f64,
    pub report: TailReport,
    /// `"light"` or `"heavy"` (heuristic).
    pub classification: String,
}

/// Histogram of `||grad f_i(x*)||` with a fitted-normal overlay and the
/// sub-Gaussian score. Writes `histogram.csv`, `histogram.svg` and
/// `diagnostic.json` under `out_dir`.
pub fn run_diagnostic(config: &DiagnosticConfig, out_dir: &Path) -> Result<DiagnosticSummary> {
    let problem = make_logreg(load_libsvm(&config.dataset)?)?;
    let cache = config
        .optimum
        .clone()
        .unwrap_or_else(|| optimum_cache_path(&config.dataset));
    let reference = if cache.exists() {
        ReferenceSolution::load(&cache)?
    } else if config.solve {
        solve_and_cache(&config.dataset, config.tol, config.max_iter, Some(&cache))?.0
    } else {
        return Err(Error::Precondition(format!(
            "no reference solution at {}; run solve-reference or pass --solve",
            cache.display()
        )));
    };
    crate::linalg::check_dim(problem.data().dimension, reference.x.len())?;
    let report = tail_report(&problem, &reference.x, config.bins)?;
    create_dir(out_dir)?;
    write(&out_dir.join("histogram.csv"), &report.histogram.to_csv())?;
    let name = config
        .dataset
        .file_name()
        .map_or_else(String::new, |s| s.to_string_lossy().into_owned());
    let svg = histogram_svg(
        &format!("||grad f_i(x*)|| — {name}"),
        "gradient norm",
        &report.histogram.edges,
        &report.histogram.counts,
        &report.histogram.normal_overlay(),
    );
    write(&out_dir.join("histogram.svg"), &svg)?;
    let summary = DiagnosticSummary {
        dataset: config.dataset.clone(),
        optimum_source: cache,
        f_star: reference.f_star,
        classification: if report.score.light { "light" } else { "heavy" }.into(),
        report,
    };
    write(&out_dir.join("diagnostic.json"), &serde_json::to_string_pretty(&summary)?)?;
    Ok(summary)
}
