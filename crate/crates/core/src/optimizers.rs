//! Iteration loops for (clipped-)SGD and (clipped-)SSTM.
//!
//! Unclipped methods are the clipped ones run with the `lambda = +inf`
//! sentinel, so the two code paths cannot drift apart.

use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::clipping::clip_in_place;
use crate::error::{Error, Result};
use crate::linalg::{check_dim, CompensatedSum, Vector};
use crate::oracle::{minibatch_into, StochasticOracle};
use crate::rng::RngStream;
use crate::schedules::{SgdOutput, SgdSchedule, SstmSchedule};

/// What happened in one optimizer step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepReport {
    /// Index of the iterate produced by this step.
    pub k: usize,
    pub f_gap: Option<f64>,
    pub dist_to_opt: Option<f64>,
    /// Norm of the mini-batch gradient before clipping.
    pub grad_norm_estimate: f64,
    pub m: usize,
    pub lambda: f64,
    pub clipped: bool,
    pub elapsed_secs: f64,
}

/// One row of a trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub k: usize,
    pub f_gap: Option<f64>,
    pub dist: Option<f64>,
    /// Cumulative oracle calls.
    pub calls: u64,
    /// Clip level used by the step that produced this iterate.
    pub lambda: f64,
    /// Cumulative clip activations.
    pub clipped: u64,
    /// Batch size of the step that produced this iterate.
    pub m: usize,
}

/// Where and why a trial stopped early.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Abort {
    pub step: usize,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub records: Vec<Record>,
    pub aborted: Option<Abort>,
}

impl Trajectory {
    pub const CSV_HEADER: &'static str = "k,f_gap,dist,calls,lambda,clipped,m";

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn checkpoints(&self) -> Vec<usize> {
        self.records.iter().map(|r| r.k).collect()
    }

    /// `f_gap` per record; missing values become NaN.
    pub fn f_gaps(&self) -> Vec<f64> {
        self.records
            .iter()
            .map(|r| r.f_gap.unwrap_or(f64::NAN))
            .collect()
    }

    pub fn last(&self) -> Option<&Record> {
        self.records.last()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(48 * (self.records.len() + 1));
        out.push_str(Self::CSV_HEADER);
        out.push('\n');
        let opt = |v: Option<f64>| v.map_or(String::new(), |v| format!("{v:e}"));
        for r in &self.records {
            let _ = writeln!(
                out,
                "{},{},{},{},{:e},{},{}",
                r.k,
                opt(r.f_gap),
                opt(r.dist),
                r.calls,
                r.lambda,
                r.clipped,
                r.m
            );
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }
}

/// Writes the JSON sidecar that accompanies a trajectory CSV.
pub fn write_sidecar<T: Serialize>(path: &Path, schedule: &T, seed: u64, stream_id: u64) -> Result<()> {
    let value = serde_json::json!({
        "seed": seed,
        "stream_id": stream_id,
        "schedule": schedule,
    });
    let text = serde_json::to_string_pretty(&value)?;
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// The result of a full optimizer run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunOutput {
    /// The method's output: `y^N`, `x̄^N` or `x^N` depending on the method.
    pub x: Vector,
    /// The final iterate (`x^N` for SGD, `y^N` for SSTM).
    pub last: Vector,
    pub trajectory: Trajectory,
    pub calls: u64,
    pub clip_activations: u64,
    /// Steps actually executed.
    pub steps: usize,
}

impl RunOutput {
    pub fn aborted(&self) -> bool {
        self.trajectory.aborted.is_some()
    }
}

fn check_record_every(record_every: usize) -> Result<()> {
    if record_every == 0 {
        Err(Error::invalid("record_every", "must be at least 1"))
    } else {
        Ok(())
    }
}

fn non_finite(step: usize, what: &str) -> Error {
    Error::NonFinite {
        step,
        what: what.to_string(),
    }
}

// ---------------------------------------------------------------------------
// clipped-SSTM
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct SstmState {
    pub x: Vector,
    pub y: Vector,
    pub z: Vector,
    /// `A_k`
    pub big_a: f64,
    pub k: usize,
    pub calls: u64,
    pub clip_activations: u64,
    g: Vec<f64>,
    scratch: Vec<f64>,
}

impl SstmState {
    /// `y^0 = z^0 = x^0`, `A_0 = 0`.
    pub fn new(x0: &[f64]) -> Self {
        SstmState {
            x: Vector::from(x0.to_vec()),
            y: Vector::from(x0.to_vec()),
            z: Vector::from(x0.to_vec()),
            big_a: 0.0,
            k: 0,
            calls: 0,
            clip_activations: 0,
            g: vec![0.0; x0.len()],
            scratch: vec![0.0; x0.len()],
        }
    }
}

/// One clipped-SSTM step:
///
/// ```text
/// x^{k+1} = (A_k y^k + alpha_{k+1} z^k) / A_{k+1}
/// g       = clip(minibatch(x^{k+1}, m_k), B / alpha_{k+1})
/// z^{k+1} = z^k - alpha_{k+1} g
/// y^{k+1} = (A_k y^k + alpha_{k+1} z^{k+1}) / A_{k+1}
/// ```
///
/// On a non-finite iterate the state is left partially updated and an error
/// is returned; callers treat that as a trial abort.
pub fn sstm_step<O: StochasticOracle + ?Sized>(
    state: &mut SstmState,
    oracle: &O,
    schedule: &SstmSchedule,
    rng: &mut RngStream,
) -> Result<StepReport> {
    sstm_step_impl(state, oracle, schedule, rng, true)
}

fn sstm_step_impl<O: StochasticOracle + ?Sized>(
    state: &mut SstmState,
    oracle: &O,
    schedule: &SstmSchedule,
    rng: &mut RngStream,
    evaluate: bool,
) -> Result<StepReport> {
    let start = Instant::now();
    let k = state.k;
    let alpha = schedule.alpha(k);
    let a_next = schedule.big_a(k);
    let w_y = state.big_a / a_next;
    let w_z = alpha / a_next;
    let m = schedule.batch(k);
    let lambda = schedule.lambda(k);

    for ((x, y), z) in state.x.iter_mut().zip(state.y.iter()).zip(state.z.iter()) {
        *x = w_y * y + w_z * z;
    }
    minibatch_into(oracle, &state.x, m, rng, &mut state.scratch, &mut state.g)?;
    let grad_norm = crate::linalg::norm(&state.g);
    let clipped = clip_in_place(&mut state.g, lambda);
    for ((z, y), g) in state.z.iter_mut().zip(state.y.iter_mut()).zip(&state.g) {
        *z -= alpha * g;
        *y = w_y * *y + w_z * *z;
    }
    state.big_a = a_next;
    state.k += 1;
    state.calls += m as u64;
    state.clip_activations += clipped as u64;
    if !state.y.is_finite() || !state.z.is_finite() {
        return Err(non_finite(state.k, "clipped-SSTM iterate"));
    }
    Ok(StepReport {
        k: state.k,
        f_gap: evaluate.then(|| oracle.gap(&state.y)).flatten(),
        dist_to_opt: evaluate
            .then(|| oracle.distance_to_optimum(&state.y))
            .flatten(),
        grad_norm_estimate: grad_norm,
        m,
        lambda,
        clipped,
        elapsed_secs: start.elapsed().as_secs_f64(),
    })
}

fn record<O: StochasticOracle + ?Sized>(
    oracle: &O,
    point: &[f64],
    k: usize,
    calls: u64,
    lambda: f64,
    clipped: u64,
    m: usize,
) -> Record {
    Record {
        k,
        f_gap: oracle.gap(point),
        dist: oracle.distance_to_optimum(point),
        calls,
        lambda,
        clipped,
        m,
    }
}

/// Runs `schedule.n` clipped-SSTM steps from `x0` and returns `y^N`.
///
/// Records `y^k` at `k = 0`, every `record_every` steps and at `k = N`.
/// A non-finite iterate ends the run early with `trajectory.aborted` set.
pub fn run_sstm<O: StochasticOracle + ?Sized>(
    oracle: &O,
    schedule: &SstmSchedule,
    x0: &[f64],
    rng: &mut RngStream,
    record_every: usize,
) -> Result<RunOutput> {
    schedule.validate()?;
    check_dim(oracle.dimension(), x0.len())?;
    check_record_every(record_every)?;
    let n = schedule.n;
    let mut state = SstmState::new(x0);
    let mut traj = Trajectory::default();
    traj.records
        .push(record(oracle, &state.y, 0, 0, schedule.lambda(0), 0, schedule.batch(0)));

    let mut prev_y = state.y.clone();
    for k in 0..n {
        prev_y.copy_from_slice(&state.y);
        let due = (k + 1) % record_every == 0 || k + 1 == n;
        match sstm_step_impl(&mut state, oracle, schedule, rng, due) {
            Ok(rep) => {
                if due {
                    traj.records.push(Record {
                        k: rep.k,
                        f_gap: rep.f_gap,
                        dist: rep.dist_to_opt,
                        calls: state.calls,
                        lambda: rep.lambda,
                        clipped: state.clip_activations,
                        m: rep.m,
                    });
                }
            }
            Err(Error::NonFinite { step, what }) => {
                traj.aborted = Some(Abort { step, reason: what });
                return Ok(RunOutput {
                    x: prev_y.clone(),
                    last: prev_y,
                    trajectory: traj,
                    calls: state.calls,
                    clip_activations: state.clip_activations,
                    steps: k,
                });
            }
            Err(e) => return Err(e),
        }
    }
    Ok(RunOutput {
        x: state.y.clone(),
        last: state.y,
        trajectory: traj,
        calls: state.calls,
        clip_activations: state.clip_activations,
        steps: n,
    })
}

// ---------------------------------------------------------------------------
// clipped-SGD
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct SgdState {
    pub x: Vector,
    /// Running sum of `x^0, ..., x^{k-1}`.
    pub sum: CompensatedSum,
    pub k: usize,
    pub calls: u64,
    pub clip_activations: u64,
    g: Vec<f64>,
    scratch: Vec<f64>,
}

impl SgdState {
    pub fn new(x0: &[f64]) -> Self {
        SgdState {
            x: Vector::from(x0.to_vec()),
            sum: CompensatedSum::new(x0.len()),
            k: 0,
            calls: 0,
            clip_activations: 0,
            g: vec![0.0; x0.len()],
            scratch: vec![0.0; x0.len()],
        }
    }

    /// `x̄^k = (1/k) sum_{j<k} x^j`; `None` before the first step.
    pub fn average(&self) -> Option<Vector> {
        self.sum.mean()
    }
}

/// One step `x^{k+1} = x^k - gamma clip(minibatch(x^k, m_k), lambda_k)`.
pub fn clipped_sgd_step<O: StochasticOracle + ?Sized>(
    state: &mut SgdState,
    oracle: &O,
    schedule: &SgdSchedule,
    rng: &mut RngStream,
) -> Result<StepReport> {
    clipped_sgd_step_impl(state, oracle, schedule, rng, true)
}

fn clipped_sgd_step_impl<O: StochasticOracle + ?Sized>(
    state: &mut SgdState,
    oracle: &O,
    schedule: &SgdSchedule,
    rng: &mut RngStream,
    evaluate: bool,
) -> Result<StepReport> {
    let start = Instant::now();
    let k = state.k;
    let m = schedule.batch(k);
    let lambda = schedule.lambda(k);
    state.sum.add(&state.x);
    minibatch_into(oracle, &state.x, m, rng, &mut state.scratch, &mut state.g)?;
    let grad_norm = crate::linalg::norm(&state.g);
    let clipped = clip_in_place(&mut state.g, lambda);
    let gamma = schedule.gamma;
    state
        .x
        .iter_mut()
        .zip(&state.g)
        .for_each(|(x, g)| *x -= gamma * g);
    state.k += 1;
    state.calls += m as u64;
    state.clip_activations += clipped as u64;
    if !state.x.is_finite() {
        return Err(non_finite(state.k, "clipped-SGD iterate"));
    }
    Ok(StepReport {
        k: state.k,
        f_gap: evaluate.then(|| oracle.gap(&state.x)).flatten(),
        dist_to_opt: evaluate
            .then(|| oracle.distance_to_optimum(&state.x))
            .flatten(),
        grad_norm_estimate: grad_norm,
        m,
        lambda,
        clipped,
        elapsed_secs: start.elapsed().as_secs_f64(),
    })
}

/// Runs `schedule.n` clipped-SGD steps from `x0`.
///
/// Returns the running average `x̄^N` for [`SgdOutput::Average`] schedules and
/// the last iterate otherwise. The trajectory always records the last iterate
/// `x^k` (at `k = 0`, every `record_every` steps, and at `k = N`).
pub fn run_sgd<O: StochasticOracle + ?Sized>(
    oracle: &O,
    schedule: &SgdSchedule,
    x0: &[f64],
    rng: &mut RngStream,
    record_every: usize,
) -> Result<RunOutput> {
    schedule.validate()?;
    check_dim(oracle.dimension(), x0.len())?;
    check_record_every(record_every)?;
    let n = schedule.n;
    let mut state = SgdState::new(x0);
    let mut traj = Trajectory::default();
    traj.records
        .push(record(oracle, &state.x, 0, 0, schedule.lambda(0), 0, schedule.batch(0)));

    let mut prev_x = state.x.clone();
    for k in 0..n {
        prev_x.copy_from_slice(&state.x);
        let due = (k + 1) % record_every == 0 || k + 1 == n;
        match clipped_sgd_step_impl(&mut state, oracle, schedule, rng, due) {
            Ok(rep) => {
                if due {
                    traj.records.push(Record {
                        k: rep.k,
                        f_gap: rep.f_gap,
                        dist: rep.dist_to_opt,
                        calls: state.calls,
                        lambda: rep.lambda,
                        clipped: state.clip_activations,
                        m: rep.m,
                    });
                }
            }
            Err(Error::NonFinite { step, what }) => {
                traj.aborted = Some(Abort { step, reason: what });
                return Ok(RunOutput {
                    x: prev_x.clone(),
                    last: prev_x,
                    trajectory: traj,
                    calls: state.calls,
                    clip_activations: state.clip_activations,
                    steps: k,
                });
            }
            Err(e) => return Err(e),
        }
    }
    let x = match schedule.output {
        SgdOutput::Average => state.average().expect("N >= 1"),
        SgdOutput::LastIterate => state.x.clone(),
    };
    Ok(RunOutput {
        x,
        last: state.x,
        trajectory: traj,
        calls: state.calls,
        clip_activations: state.clip_activations,
        steps: n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::{NoiseFamily, NoiseModel};
    use crate::problems::make_toy;
    use crate::schedules::{sstm_theorem_params, TheoremConstants};

    #[test]
    fn sstm_one_step_optimum_at_a_one() {
        let toy = make_toy(3, None).unwrap();
        let s = SstmSchedule::manual(1.0, 1.0, f64::INFINITY, 1, 1).unwrap();
        let mut st = SstmState::new(&[1.0, -2.0, 0.5]);
        let mut rng = RngStream::new(0, 0);
        sstm_step(&mut st, &toy, &s, &mut rng).unwrap();
        assert_eq!(st.x.as_slice(), &[1.0, -2.0, 0.5]);
        assert_eq!(st.z.as_slice(), &[0.0, 0.0, 0.0]);
        assert_eq!(st.y.as_slice(), &[0.0, 0.0, 0.0]);
        assert_eq!(st.calls, 1);
    }

    #[test]
    fn sstm_clip_binding_moves_z_by_b() {
        let toy = make_toy(2, None).unwrap();
        let b = 0.01;
        let s = SstmSchedule::manual(1.0, 1.0, b, 1, 1).unwrap();
        let mut st = SstmState::new(&[30.0, 40.0]);
        let mut rng = RngStream::new(0, 0);
        let rep = sstm_step(&mut st, &toy, &s, &mut rng).unwrap();
        assert!(rep.clipped);
        let moved = st.z.distance(&[30.0, 40.0]);
        assert!((moved - b).abs() <= 1e-12 * b);
    }

    #[test]
    fn sgd_examples() {
        let toy = make_toy(1, None).unwrap();
        let s = SgdSchedule::manual(0.5, 10.0, 1, 2).unwrap();
        let out = run_sgd(&toy, &s, &[1.0], &mut RngStream::new(0, 0), 1).unwrap();
        let xs: Vec<f64> = out.trajectory.records.iter().map(|r| r.f_gap.unwrap()).collect();
        assert_eq!(xs, vec![0.5, 0.125, 0.03125]);
        assert_eq!(out.x.as_slice(), &[0.25]);

        let s = SgdSchedule::manual(0.5, 1.0, 1, 1).unwrap();
        let out = run_sgd(&toy, &s, &[100.0], &mut RngStream::new(0, 0), 1).unwrap();
        assert_eq!(out.x.as_slice(), &[99.5]);
        assert_eq!(out.clip_activations, 1);

        let s = SgdSchedule::manual(0.0, 1.0, 1, 5).unwrap();
        let out = run_sgd(&toy, &s, &[3.0], &mut RngStream::new(0, 0), 1).unwrap();
        assert_eq!(out.x.as_slice(), &[3.0]);
    }

    #[test]
    fn convex_average_of_single_step_is_start() {
        let toy = make_toy(2, None).unwrap();
        let mut s = SgdSchedule::manual(0.3, f64::INFINITY, 1, 1).unwrap();
        s.output = SgdOutput::Average;
        let out = run_sgd(&toy, &s, &[1.0, 2.0], &mut RngStream::new(0, 0), 1).unwrap();
        assert_eq!(out.x.as_slice(), &[1.0, 2.0]);
        assert_ne!(out.last.as_slice(), &[1.0, 2.0]);
    }

    #[test]
    fn trajectory_length_contract() {
        let toy = make_toy(1, None).unwrap();
        for (n, every) in [(10, 3), (10, 5), (10, 10), (7, 1), (1, 4)] {
            let s = SgdSchedule::manual(0.1, 1.0, 1, n).unwrap();
            let out = run_sgd(&toy, &s, &[1.0], &mut RngStream::new(0, 0), every).unwrap();
            assert_eq!(out.trajectory.len(), n.div_ceil(every) + 1);
        }
    }

    #[test]
    fn deterministic_theorem_bound() {
        let toy = make_toy(5, None).unwrap();
        let x0 = [1.0, 0.0, -1.0, 2.0, 0.5];
        let r0 = crate::linalg::norm(&x0);
        let s = sstm_theorem_params(1.0, 0.0, r0, 100, 0.05, &TheoremConstants::default()).unwrap();
        let out = run_sstm(&toy, &s, &x0, &mut RngStream::new(0, 0), 10).unwrap();
        assert!(toy.gap(&out.x).unwrap() <= s.bound().unwrap());
    }

    #[test]
    fn unclipped_matches_infinite_lambda() {
        let noise = NoiseModel::new(NoiseFamily::burr(), 4).unwrap();
        let toy = make_toy(4, Some(noise)).unwrap();
        let s = SgdSchedule::manual(0.01, f64::INFINITY, 2, 200).unwrap();
        let a = run_sgd(&toy, &s, &[1.0; 4], &mut RngStream::new(3, 1), 7).unwrap();
        let b = run_sgd(&toy, &s.unclipped(), &[1.0; 4], &mut RngStream::new(3, 1), 7).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.calls, 400);
    }

    #[test]
    fn trajectory_csv_shape() {
        let toy = make_toy(1, None).unwrap();
        let s = SgdSchedule::manual(0.5, 10.0, 1, 2).unwrap();
        let out = run_sgd(&toy, &s, &[1.0], &mut RngStream::new(0, 0), 1).unwrap();
        let csv = out.trajectory.to_csv();
        let lines: Vec<_> = csv.lines().collect();
        assert_eq!(lines[0], Trajectory::CSV_HEADER);
        assert_eq!(lines.len(), 4);
        assert!(lines[1].starts_with("0,5e-1,1e0,0,"));
    }
}
