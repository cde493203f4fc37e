//! Concrete oracles: the noisy quadratic toy problem and finite-sum logistic
//! regression, plus a deterministic high-accuracy reference solver.

mod libsvm;
mod logreg;
mod toy;

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Vector;
use crate::oracle::{Optimum, StochasticOracle};

pub use libsvm::{parse_libsvm, parse_libsvm_named, write_libsvm, SparseDataset, SparseRow};
pub use logreg::{make_logreg, max_eigenvalue_gram, LogisticRegressionProblem};
pub use toy::{make_toy, QuadraticToyProblem};

/// Default gradient-norm certificate for reference solves.
pub const DEFAULT_REFERENCE_TOL: f64 = 1e-8;
pub const DEFAULT_REFERENCE_MAX_ITER: usize = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StopReason {
    GradientNorm,
    IterationCap,
}

/// Output of [`solve_reference`]; also the on-disk cache format.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceSolution {
    pub x: Vector,
    pub f_star: f64,
    pub grad_norm: f64,
    pub tol: f64,
    pub iterations: usize,
    pub stop: StopReason,
}

impl ReferenceSolution {
    pub fn converged(&self) -> bool {
        self.stop == StopReason::GradientNorm
    }

    /// Turns an iteration-cap stop into an error.
    pub fn require_converged(self) -> Result<Self> {
        if self.converged() {
            Ok(self)
        } else {
            Err(Error::NotConverged {
                iterations: self.iterations,
                grad_norm: self.grad_norm,
                tol: self.tol,
            })
        }
    }

    pub fn optimum(&self) -> Optimum {
        Optimum {
            x: self.x.clone(),
            value: self.f_star,
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let sol: ReferenceSolution = serde_json::from_str(&text)?;
        if !sol.x.is_finite() || !sol.f_star.is_finite() {
            return Err(Error::invalid("optimum cache", "non-finite entries"));
        }
        Ok(sol)
    }
}

/// The cache file that lives beside a dataset: `<dataset>.optimum.json`.
pub fn optimum_cache_path(dataset: &Path) -> PathBuf {
    let mut name = dataset.as_os_str().to_owned();
    name.push(".optimum.json");
    PathBuf::from(name)
}

/// Loads a LIBSVM file from disk.
pub fn load_libsvm(path: &Path) -> Result<SparseDataset> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_libsvm_named(std::io::BufReader::new(file), &path.display().to_string())
}

/// Minimizes `f` to `||grad f|| <= tol` with full-gradient accelerated descent
/// (step `1/L`, momentum restarted whenever it opposes the gradient).
///
/// Stops at `max_iter` otherwise; the returned [`StopReason`] records which
/// criterion fired, and `f_star` is then an upper-bound estimate.
pub fn solve_reference<O: StochasticOracle + ?Sized>(
    oracle: &O,
    x0: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<ReferenceSolution> {
    if !(tol > 0.0) {
        return Err(Error::invalid("tol", "must be positive"));
    }
    crate::linalg::check_dim(oracle.dimension(), x0.len())?;
    let n = x0.len();
    let step = 1.0 / oracle.smoothness();
    let mut x = x0.to_vec();
    let mut x_prev = x.clone();
    let mut y = x.clone();
    let mut g = vec![0.0; n];
    let mut t = 1.0_f64;

    oracle.eval_gradient(&x, &mut g);
    let mut grad_norm = crate::linalg::norm(&g);
    let mut iterations = 0;
    while grad_norm > tol && iterations < max_iter {
        oracle.eval_gradient(&y, &mut g);
        x_prev.copy_from_slice(&x);
        for i in 0..n {
            x[i] = y[i] - step * g[i];
        }
        // Gradient-based adaptive restart: drop momentum when the step
        // direction and the gradient at y disagree.
        let restart: f64 = (0..n).map(|i| g[i] * (x[i] - x_prev[i])).sum();
        let t_next = if restart > 0.0 {
            1.0
        } else {
            0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt())
        };
        let beta = if restart > 0.0 { 0.0 } else { (t - 1.0) / t_next };
        for i in 0..n {
            y[i] = x[i] + beta * (x[i] - x_prev[i]);
        }
        t = t_next;
        iterations += 1;

        oracle.eval_gradient(&x, &mut g);
        grad_norm = crate::linalg::norm(&g);
        if !grad_norm.is_finite() {
            return Err(Error::NonFinite {
                step: iterations,
                what: "reference solver gradient".into(),
            });
        }
    }
    let stop = if grad_norm <= tol {
        StopReason::GradientNorm
    } else {
        StopReason::IterationCap
    };
    Ok(ReferenceSolution {
        f_star: oracle.eval(&x),
        x: Vector::from_vec(x),
        grad_norm,
        tol,
        iterations,
        stop,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toy_reference_is_origin() {
        let toy = make_toy(3, None).unwrap();
        let sol = solve_reference(&toy, &[1.0, -2.0, 3.0], 1e-12, 100).unwrap();
        assert!(sol.converged());
        assert_eq!(sol.x.as_slice(), &[0.0, 0.0, 0.0]);
        assert_eq!(sol.f_star, 0.0);
    }

    #[test]
    fn separable_one_dimensional_stops_on_gradient() {
        let data = SparseDataset::from_dense(&[vec![1.0]], &[1.0]).unwrap();
        let p = make_logreg(data).unwrap();
        let sol = solve_reference(&p, &[0.0], 1e-8, 1_000_000).unwrap();
        assert_eq!(sol.stop, StopReason::GradientNorm);
        assert!(sol.grad_norm <= 1e-8);
        assert!((sol.f_star - p.value(&sol.x).unwrap()).abs() == 0.0);
        assert!(sol.x[0] > 10.0);
    }

    #[test]
    fn iteration_cap_is_reported() {
        let data = SparseDataset::from_dense(&[vec![1.0]], &[1.0]).unwrap();
        let p = make_logreg(data).unwrap();
        let sol = solve_reference(&p, &[0.0], 1e-8, 3).unwrap();
        assert_eq!(sol.stop, StopReason::IterationCap);
        assert!(matches!(
            sol.require_converged(),
            Err(Error::NotConverged { iterations: 3, .. })
        ));
    }

    #[test]
    fn cache_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let data_path = dir.path().join("toy.libsvm");
        let cache = optimum_cache_path(&data_path);
        assert!(cache.to_string_lossy().ends_with("toy.libsvm.optimum.json"));
        let sol = ReferenceSolution {
            x: Vector::from_vec(vec![0.1, -0.25]),
            f_star: 0.3,
            grad_norm: 1e-9,
            tol: 1e-8,
            iterations: 12,
            stop: StopReason::GradientNorm,
        };
        sol.save(&cache).unwrap();
        let text = std::fs::read_to_string(&cache).unwrap();
        for key in ["\"x\"", "\"f_star\"", "\"grad_norm\"", "\"tol\""] {
            assert!(text.contains(key));
        }
        assert_eq!(ReferenceSolution::load(&cache).unwrap(), sol);
    }

    #[test]
    fn rejects_nonpositive_tol() {
        let toy = make_toy(1, None).unwrap();
        assert!(solve_reference(&toy, &[1.0], 0.0, 10).is_err());
    }
}
