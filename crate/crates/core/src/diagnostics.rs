//! Noise-tail diagnostics and ensemble statistics over trajectories.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};
use crate::optimizers::Trajectory;
use crate::problems::LogisticRegressionProblem;

/// Histogram of sample magnitudes with a moment-matched normal overlay.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailHistogram {
    pub edges: Vec<f64>,
    pub counts: Vec<u64>,
    pub sample_count: usize,
    pub mean: f64,
    /// Population variance (`1/n` normalisation).
    pub variance: f64,
}

impl TailHistogram {
    /// Equal-width histogram over `[min, max]`. All-equal samples produce a
    /// single bin of zero width.
    pub fn from_samples(samples: &[f64], bins: usize) -> Result<Self> {
        if bins < 2 {
            return Err(Error::invalid("bins", "at least 2 bins are required"));
        }
        if samples.is_empty() {
            return Err(Error::invalid("samples", "empty sample"));
        }
        if samples.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("samples", "non-finite sample"));
        }
        let n = samples.len();
        let mean = samples.iter().sum::<f64>() / n as f64;
        let variance = samples.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
        let lo = samples.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = samples.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if lo == hi {
            return Ok(TailHistogram {
                edges: vec![lo, hi],
                counts: vec![n as u64],
                sample_count: n,
                mean,
                variance,
            });
        }
        let width = (hi - lo) / bins as f64;
        let edges: Vec<f64> = (0..=bins)
            .map(|i| if i == bins { hi } else { lo + width * i as f64 })
            .collect();
        let mut counts = vec![0u64; bins];
        for &v in samples {
            let idx = (((v - lo) / width) as usize).min(bins - 1);
            counts[idx] += 1;
        }
        Ok(TailHistogram {
            edges,
            counts,
            sample_count: n,
            mean,
            variance,
        })
    }

    pub fn bins(&self) -> usize {
        self.counts.len()
    }

    pub fn bin_width(&self, i: usize) -> f64 {
        self.edges[i + 1] - self.edges[i]
    }

    /// Normal density with the empirical mean and variance, scaled to counts
    /// by `sample_count * bin width`, at each bin centre.
    pub fn normal_overlay(&self) -> Vec<(f64, f64)> {
        let sd = self.variance.sqrt();
        (0..self.bins())
            .map(|i| {
                let centre = 0.5 * (self.edges[i] + self.edges[i + 1]);
                let density = if sd > 0.0 {
                    let z = (centre - self.mean) / sd;
                    (-0.5 * z * z).exp() / (sd * (2.0 * std::f64::consts::PI).sqrt())
                } else {
                    0.0
                };
                (centre, density * self.sample_count as f64 * self.bin_width(i))
            })
            .collect()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("bin_lo,bin_hi,count,normal_expected\n");
        for (i, (_, expected)) in self.normal_overlay().into_iter().enumerate() {
            let _ = writeln!(
                out,
                "{:e},{:e},{},{:e}",
                self.edges[i],
                self.edges[i + 1],
                self.counts[i],
                expected
            );
        }
        out
    }
}

/// Histogram of `||grad f_i(x)||` over all samples `i`.
pub fn gradient_norm_histogram(
    problem: &LogisticRegressionProblem,
    x: &[f64],
    bins: usize,
) -> Result<TailHistogram> {
    crate::linalg::check_dim(crate::oracle::StochasticOracle::dimension(problem), x.len())?;
    TailHistogram::from_samples(&problem.component_gradient_norms(x, false), bins)
}

/// Kolmogorov-Smirnov distance between the samples and the normal law with
/// their own mean and variance.
pub fn ks_against_fitted_normal(samples: &[f64]) -> Result<f64> {
    let n = samples.len() as f64;
    if samples.len() < 2 {
        return Err(Error::invalid("samples", "at least two samples are required"));
    }
    let mean = samples.iter().sum::<f64>() / n;
    let sd = (samples.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n).sqrt();
    if !(sd > 0.0) {
        return Err(Error::invalid("samples", "zero empirical variance"));
    }
    let mut sorted = samples.to_vec();
    Ok(crate::noise::ks_statistic(&mut sorted, |v| {
        0.5 * erfc(-(v - mean) / (sd * std::f64::consts::SQRT_2))
    }))
}

/// Default variance inflation in the sub-Gaussian score.
pub const SUBGAUSSIAN_KAPPA: f64 = 4.0;
const SUMMAND_CAP_LOG: f64 = 50.0;

/// Heuristic light/heavy tail classifier; not a hypothesis test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SubGaussianScore {
    /// `mean_i min{exp(|eta_i - mean|^2 / (kappa s^2)), e^50} / e`.
    pub score: f64,
    pub kappa: f64,
    /// Fraction of summands that hit the cap.
    pub capped_fraction: f64,
    pub light: bool,
}

/// Empirical `E[exp(|eta - E eta|^2 / sigma^2)]` with `sigma^2 = kappa s^2`
/// (`s^2` the sample variance), relative to the sub-Gaussian threshold `e`.
///
/// With `kappa = 4` a Gaussian gives `sqrt(2) / e ~ 0.52`; polynomial tails
/// drive the capped average far above 1.
pub fn subgaussian_diagnostic(samples: &[f64]) -> Result<SubGaussianScore> {
    subgaussian_diagnostic_with(samples, SUBGAUSSIAN_KAPPA)
}

pub fn subgaussian_diagnostic_with(samples: &[f64], kappa: f64) -> Result<SubGaussianScore> {
    if samples.len() < 100 {
        return Err(Error::invalid("samples", "at least 100 samples are required"));
    }
    if !(kappa > 0.0) {
        return Err(Error::invalid("kappa", "must be positive"));
    }
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let var = samples.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    if !(var > 0.0) || !var.is_finite() {
        return Err(Error::invalid("samples", "zero or non-finite empirical variance"));
    }
    let sigma_sq = kappa * var;
    let mut capped = 0usize;
    let total: f64 = samples
        .iter()
        .map(|v| {
            let e = (v - mean) * (v - mean) / sigma_sq;
            if e >= SUMMAND_CAP_LOG {
                capped += 1;
                SUMMAND_CAP_LOG.exp()
            } else {
                e.exp()
            }
        })
        .sum();
    let score = total / n / std::f64::consts::E;
    Ok(SubGaussianScore {
        score,
        kappa,
        capped_fraction: capped as f64 / n,
        light: score <= 1.0,
    })
}

/// Linear-interpolation quantile of sorted data (`+inf` entries allowed).
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    let h = (sorted.len() - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    let frac = h - lo as f64;
    if lo == hi || frac == 0.0 {
        return sorted[lo];
    }
    if sorted[hi] == sorted[lo] {
        return sorted[lo];
    }
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

/// Quantiles of `f_gap` across trials at each checkpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleStats {
    pub checkpoints: Vec<usize>,
    pub levels: Vec<f64>,
    /// `quantiles[j][c]`: level `levels[j]` at checkpoint `c`.
    pub quantiles: Vec<Vec<f64>>,
    pub trials: usize,
    pub aborted_trials: usize,
}

impl EnsembleStats {
    pub fn curve(&self, level: f64) -> Option<&[f64]> {
        self.levels
            .iter()
            .position(|&l| l == level)
            .map(|j| self.quantiles[j].as_slice())
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("k");
        for l in &self.levels {
            let _ = write!(out, ",q{l}");
        }
        out.push('\n');
        for (c, k) in self.checkpoints.iter().enumerate() {
            let _ = write!(out, "{k}");
            for q in &self.quantiles {
                let _ = write!(out, ",{:e}", q[c]);
            }
            out.push('\n');
        }
        out
    }
}

/// Per-checkpoint quantiles of `f_gap` with linear interpolation between
/// order statistics. Aborted trials whose checkpoints are a prefix of the
/// common grid count as `+inf` after the abort.
pub fn ensemble_quantiles(trajectories: &[Trajectory], levels: &[f64]) -> Result<EnsembleStats> {
    let series: Vec<(Vec<usize>, Vec<f64>, bool)> = trajectories
        .iter()
        .map(|t| (t.checkpoints(), t.f_gaps(), t.aborted.is_some()))
        .collect();
    ensemble_quantiles_from(&series, levels)
}

/// As [`ensemble_quantiles`] for raw `(checkpoints, values, aborted)` series.
pub fn ensemble_quantiles_from(
    series: &[(Vec<usize>, Vec<f64>, bool)],
    levels: &[f64],
) -> Result<EnsembleStats> {
    if series.is_empty() {
        return Err(Error::invalid("trajectories", "empty ensemble"));
    }
    if levels.iter().any(|l| !(0.0..=1.0).contains(l)) {
        return Err(Error::invalid("levels", "quantile levels must lie in [0, 1]"));
    }
    let grid = series
        .iter()
        .map(|(k, _, _)| k)
        .max_by_key(|k| k.len())
        .expect("non-empty")
        .clone();
    let mut aborted_trials = 0;
    for (i, (ks, vs, aborted)) in series.iter().enumerate() {
        if ks.len() != vs.len() {
            return Err(Error::GridMismatch(format!("trial {i}: values and checkpoints differ in length")));
        }
        let prefix = grid.starts_with(ks);
        if !prefix || (ks.len() < grid.len() && !aborted) {
            return Err(Error::GridMismatch(format!(
                "trial {i} has {} checkpoints not matching the {}-point grid",
                ks.len(),
                grid.len()
            )));
        }
        aborted_trials += usize::from(*aborted);
    }
    let mut quantiles = vec![Vec::with_capacity(grid.len()); levels.len()];
    let mut column = Vec::with_capacity(series.len());
    for c in 0..grid.len() {
        column.clear();
        column.extend(series.iter().map(|(_, vs, _)| {
            let v = vs.get(c).copied().unwrap_or(f64::INFINITY);
            if v.is_nan() {
                f64::INFINITY
            } else {
                v
            }
        }));
        column.sort_by(f64::total_cmp);
        for (j, &l) in levels.iter().enumerate() {
            quantiles[j].push(quantile_sorted(&column, l));
        }
    }
    Ok(EnsembleStats {
        checkpoints: grid,
        levels: levels.to_vec(),
        quantiles,
        trials: series.len(),
        aborted_trials,
    })
}

/// `max / median` of the last `ceil(tail_fraction * len)` values.
pub fn oscillation_metric(values: &[f64], tail_fraction: f64) -> Result<f64> {
    if !(tail_fraction > 0.0 && tail_fraction <= 1.0) {
        return Err(Error::invalid("tail_fraction", "must lie in (0, 1]"));
    }
    let len = ((values.len() as f64) * tail_fraction).ceil() as usize;
    if len == 0 {
        return Err(Error::invalid("trajectory", "empty window"));
    }
    let mut window = values[values.len() - len..].to_vec();
    window.sort_by(f64::total_cmp);
    let max = *window.last().expect("non-empty");
    let median = quantile_sorted(&window, 0.5);
    Ok(if median > 0.0 {
        max / median
    } else if max == 0.0 {
        1.0
    } else {
        f64::INFINITY
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optimizers::Record;

    fn traj(values: &[f64]) -> Trajectory {
        Trajectory {
            records: values
                .iter()
                .enumerate()
                .map(|(k, &v)| Record {
                    k,
                    f_gap: Some(v),
                    dist: None,
                    calls: k as u64,
                    lambda: 1.0,
                    clipped: 0,
                    m: 1,
                })
                .collect(),
            aborted: None,
        }
    }

    #[test]
    fn identical_samples_single_bin() {
        let h = TailHistogram::from_samples(&[2.0; 50], 10).unwrap();
        assert_eq!(h.counts, vec![50]);
        assert_eq!(h.variance, 0.0);
    }

    #[test]
    fn outlier_lands_in_last_bin() {
        let mut s = vec![1.0; 99];
        s.push(1000.0);
        let h = TailHistogram::from_samples(&s, 20).unwrap();
        assert_eq!(*h.counts.last().unwrap(), 1);
        assert_eq!(h.counts[0], 99);
        assert_eq!(h.counts.iter().sum::<u64>(), 100);
        let mean = (99.0 + 1000.0) / 100.0;
        assert!((h.variance - (99.0 * (1.0f64 - mean).powi(2) + (1000.0f64 - mean).powi(2)) / 100.0).abs() < 1e-9);
        assert!(h.variance > 0.9 * (1000.0f64 - mean).powi(2) / 100.0);
    }

    #[test]
    fn histogram_rejects_one_bin() {
        assert!(TailHistogram::from_samples(&[1.0, 2.0], 1).is_err());
    }

    #[test]
    fn quantile_conventions() {
        let one = ensemble_quantiles(&[traj(&[3.0, 2.0, 1.0])], &[0.1, 0.5, 0.95]).unwrap();
        for q in &one.quantiles {
            assert_eq!(q, &vec![3.0, 2.0, 1.0]);
        }
        let two = ensemble_quantiles(&[traj(&[1.0, 4.0]), traj(&[3.0, 8.0])], &[0.5]).unwrap();
        assert_eq!(two.quantiles[0], vec![2.0, 6.0]);
    }

    #[test]
    fn mismatched_grids_rejected() {
        let a = traj(&[1.0, 2.0]);
        let b = traj(&[1.0, 2.0, 3.0]);
        assert!(matches!(ensemble_quantiles(&[a, b], &[0.5]), Err(Error::GridMismatch(_))));
    }

    #[test]
    fn aborted_trials_count_as_infinite() {
        let a = traj(&[1.0, 2.0, 3.0]);
        let mut b = traj(&[1.0]);
        b.aborted = Some(crate::optimizers::Abort {
            step: 1,
            reason: "nan".into(),
        });
        let s = ensemble_quantiles(&[a, b], &[0.0, 1.0]).unwrap();
        assert_eq!(s.quantiles[1], vec![1.0, f64::INFINITY, f64::INFINITY]);
        assert_eq!(s.quantiles[0], vec![1.0, 2.0, 3.0]);
        assert_eq!(s.aborted_trials, 1);
    }

    #[test]
    fn oscillation_examples() {
        assert_eq!(oscillation_metric(&[5.0; 40], 0.25).unwrap(), 1.0);
        let mut v = vec![1.0; 40];
        v[35] = 100.0;
        assert_eq!(oscillation_metric(&v, 0.25).unwrap(), 100.0);
        let scaled: Vec<f64> = v.iter().map(|x| x * 7.5).collect();
        assert_eq!(oscillation_metric(&scaled, 0.25).unwrap(), 100.0);
        assert!(oscillation_metric(&[], 0.5).is_err());
        assert!(oscillation_metric(&[1.0], 0.0).is_err());
    }

    #[test]
    fn subgaussian_rejects_constant_and_small() {
        assert!(subgaussian_diagnostic(&[1.0; 200]).is_err());
        assert!(subgaussian_diagnostic(&[1.0, 2.0]).is_err());
    }
}
