//! R-clipped-SSTM and R-clipped-SGD: fixed-schedule restarts of the inner
//! methods for strongly convex problems.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{check_dim, Vector};
use crate::optimizers::{run_sgd, run_sstm, Abort, Trajectory};
use crate::oracle::StochasticOracle;
use crate::rng::RngStream;
use crate::schedules::{RestartPlan, RestartStage};

/// Per-restart summary row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RestartSummary {
    pub t: usize,
    /// `B_t` (SSTM) or `lambda_t` (SGD).
    pub clip_scale: f64,
    /// Largest batch size used in the restart.
    pub m_max: usize,
    /// `f(x̂^t) - f*` before the restart.
    pub f_gap_start: Option<f64>,
    /// `f(x̂^{t+1}) - f*` after the restart.
    pub f_gap_end: Option<f64>,
    pub calls: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RestartOutput {
    /// `x̂^tau`, or the last completed restart's output after an abort.
    pub x: Vector,
    pub summaries: Vec<RestartSummary>,
    pub trajectories: Vec<Trajectory>,
    pub calls: u64,
    pub aborted: Option<Abort>,
}

impl RestartOutput {
    /// `f(x̂^t) - f*` for `t = 0..=completed restarts`.
    pub fn boundary_gaps(&self) -> Vec<f64> {
        let mut out: Vec<f64> = self
            .summaries
            .first()
            .map(|s| s.f_gap_start.unwrap_or(f64::NAN))
            .into_iter()
            .collect();
        out.extend(self.summaries.iter().map(|s| s.f_gap_end.unwrap_or(f64::NAN)));
        out
    }

    /// Concatenates the inner trajectories on a global iteration axis,
    /// dropping each restart's initial record (it repeats the previous end).
    pub fn merged_trajectory(&self, n0: usize) -> Trajectory {
        let mut merged = Trajectory::default();
        let mut calls_offset = 0;
        let mut clipped_offset = 0;
        for (t, traj) in self.trajectories.iter().enumerate() {
            let skip = usize::from(t > 0);
            for r in traj.records.iter().skip(skip) {
                let mut r = r.clone();
                r.k += t * n0;
                r.calls += calls_offset;
                r.clipped += clipped_offset;
                merged.records.push(r);
            }
            if let Some(last) = traj.records.last() {
                calls_offset += last.calls;
                clipped_offset += last.clipped;
            }
        }
        merged.aborted = self.aborted.clone();
        merged
    }

    pub fn write_summary_json(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(&self.summaries)?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }
}

/// Runs R-clipped-SSTM: restart `t` runs clipped-SSTM from `x̂^t` with `B_t`
/// and `m_k^t`, on an RNG stream forked by `t`.
pub fn run_restarted_sstm<O: StochasticOracle + ?Sized>(
    oracle: &O,
    plan: &RestartPlan,
    x0: &[f64],
    rng: &RngStream,
    record_every: usize,
) -> Result<RestartOutput> {
    run_restarted(oracle, plan, x0, rng, record_every)
}

/// Runs R-clipped-SGD: restart `t` runs convex clipped-SGD from `x̂^t` with
/// batch `m^t` and clip level `lambda_t`, returning its average iterate.
pub fn run_restarted_sgd<O: StochasticOracle + ?Sized>(
    oracle: &O,
    plan: &RestartPlan,
    x0: &[f64],
    rng: &RngStream,
    record_every: usize,
) -> Result<RestartOutput> {
    run_restarted(oracle, plan, x0, rng, record_every)
}

fn run_restarted<O: StochasticOracle + ?Sized>(
    oracle: &O,
    plan: &RestartPlan,
    x0: &[f64],
    rng: &RngStream,
    record_every: usize,
) -> Result<RestartOutput> {
    check_dim(oracle.dimension(), x0.len())?;
    if !(oracle.strong_convexity() > 0.0) {
        return Err(Error::Precondition(
            "restarted methods need a strongly convex oracle (mu > 0)".into(),
        ));
    }
    if plan.stages.len() != plan.tau {
        return Err(Error::invalid("plan", "one stage per restart required"));
    }
    let mut x = Vector::from(x0.to_vec());
    let mut out = RestartOutput {
        x: x.clone(),
        summaries: Vec::with_capacity(plan.tau),
        trajectories: Vec::with_capacity(plan.tau),
        calls: 0,
        aborted: None,
    };
    for (t, stage) in plan.stages.iter().enumerate() {
        let mut inner_rng = rng.fork(t as u64);
        let run = match stage {
            RestartStage::Sstm(s) => run_sstm(oracle, s, &x, &mut inner_rng, record_every)?,
            RestartStage::Sgd(s) => run_sgd(oracle, s, &x, &mut inner_rng, record_every)?,
        };
        out.summaries.push(RestartSummary {
            t,
            clip_scale: stage.clip_scale(),
            m_max: stage.batches().max(),
            f_gap_start: oracle.gap(&x),
            f_gap_end: oracle.gap(&run.x),
            calls: run.calls,
        });
        out.calls += run.calls;
        let aborted = run.trajectory.aborted.clone();
        out.trajectories.push(run.trajectory);
        if let Some(abort) = aborted {
            out.aborted = Some(Abort {
                step: t * plan.n0 + abort.step,
                reason: format!("restart {t}: {}", abort.reason),
            });
            out.x = x;
            return Ok(out);
        }
        x = run.x;
    }
    out.x = x;
    Ok(out)
}
