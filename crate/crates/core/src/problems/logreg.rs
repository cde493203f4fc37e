use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg::Vector;
use crate::oracle::{Optimum, StochasticOracle};
use crate::rng::RngStream;

use super::libsvm::SparseDataset;

// The Rayleigh quotient approaches lambda_max from below, so a loose stop
// would understate L.
const POWER_ITERATION_TOL: f64 = 1e-12;
const POWER_ITERATION_CAP: usize = 10_000;
const POWER_ITERATION_SEED: u64 = 0x5eed_1a4d;
const VARIANCE_PROBES: usize = 10;

/// `f(x) = (1/r) sum_i log(1 + exp(-y_i <a_i, x>))`, sampled by a uniform
/// random row index.
#[derive(Debug, Clone)]
pub struct LogisticRegressionProblem {
    data: SparseDataset,
    smoothness: f64,
    variance: f64,
    optimum: Option<Optimum>,
}

/// Builds the finite-sum oracle: `L = lambda_max(A^T A) / (4 r)` by power
/// iteration and `sigma^2` as the largest empirical per-sample variance over
/// `x = 0` and ten random unit perturbations of it.
pub fn make_logreg(data: SparseDataset) -> Result<LogisticRegressionProblem> {
    if data.is_empty() {
        return Err(Error::invalid("data", "empty dataset"));
    }
    if data.labels.len() != data.rows.len() {
        return Err(Error::invalid("labels", "one label per row required"));
    }
    if data.dimension == 0 {
        return Err(Error::invalid("data", "dataset has no features"));
    }
    for row in &data.rows {
        if let Some(&j) = row.indices.last() {
            if j as usize >= data.dimension {
                return Err(Error::DimensionMismatch {
                    expected: data.dimension,
                    actual: j as usize + 1,
                });
            }
        }
    }
    let lambda_max = max_eigenvalue_gram(&data);
    let smoothness = lambda_max / (4.0 * data.len() as f64);
    if !(smoothness > 0.0) {
        return Err(Error::invalid("data", "all feature values are zero"));
    }
    let mut problem = LogisticRegressionProblem {
        data,
        smoothness,
        variance: 0.0,
        optimum: None,
    };
    problem.variance = problem.estimate_variance(&Vector::zeros(problem.dimension()));
    Ok(problem)
}

impl LogisticRegressionProblem {
    pub fn data(&self) -> &SparseDataset {
        &self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn with_optimum(mut self, optimum: Optimum) -> Result<Self> {
        optimum.x.check_dim(self.dimension())?;
        self.optimum = Some(optimum);
        Ok(self)
    }

    /// Probe-set variance estimate around `center`.
    pub fn estimate_variance(&self, center: &Vector) -> f64 {
        let mut rng = RngStream::new(POWER_ITERATION_SEED, 1);
        let n = self.dimension();
        let mut best = self.sample_variance_at(center);
        for _ in 0..VARIANCE_PROBES {
            let mut dir: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
            let norm = crate::linalg::norm(&dir);
            dir.iter_mut().for_each(|v| *v /= norm);
            let mut probe = center.clone();
            probe.axpy(1.0, &dir);
            best = best.max(self.sample_variance_at(&probe));
        }
        best
    }

    /// `(1/r) sum_i ||grad f_i(x) - grad f(x)||^2`.
    pub fn sample_variance_at(&self, x: &[f64]) -> f64 {
        let n = self.dimension();
        let mut full = vec![0.0; n];
        self.eval_gradient(x, &mut full);
        let mut gi = vec![0.0; n];
        let total: f64 = (0..self.len())
            .map(|i| {
                self.component_gradient(i, x, &mut gi);
                gi.iter().zip(&full).map(|(a, b)| (a - b) * (a - b)).sum::<f64>()
            })
            .sum();
        total / self.len() as f64
    }

    /// `f_i(x) = log(1 + exp(-y_i <a_i, x>))`
    pub fn component_value(&self, i: usize, x: &[f64]) -> f64 {
        softplus(-self.data.labels[i] * self.data.rows[i].dot(x))
    }

    /// `grad f_i(x) = -y_i a_i / (1 + exp(y_i <a_i, x>))`
    pub fn component_gradient(&self, i: usize, x: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        let y = self.data.labels[i];
        let row = &self.data.rows[i];
        row.axpy_into(-y * sigmoid(-y * row.dot(x)), out);
    }

    /// Euclidean norms of every component gradient at `x`, optionally centred
    /// by the full gradient.
    pub fn component_gradient_norms(&self, x: &[f64], centered: bool) -> Vec<f64> {
        let n = self.dimension();
        let mut full = vec![0.0; n];
        if centered {
            self.eval_gradient(x, &mut full);
        }
        let mut gi = vec![0.0; n];
        (0..self.len())
            .map(|i| {
                self.component_gradient(i, x, &mut gi);
                gi.iter()
                    .zip(&full)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
                    .sqrt()
            })
            .collect()
    }
}

impl StochasticOracle for LogisticRegressionProblem {
    fn dimension(&self) -> usize {
        self.data.dimension
    }

    fn smoothness(&self) -> f64 {
        self.smoothness
    }

    fn variance_bound(&self) -> f64 {
        self.variance
    }

    fn optimum(&self) -> Option<&Optimum> {
        self.optimum.as_ref()
    }

    fn eval(&self, x: &[f64]) -> f64 {
        let total: f64 = (0..self.len()).map(|i| self.component_value(i, x)).sum();
        total / self.len() as f64
    }

    fn eval_gradient(&self, x: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        let inv_r = 1.0 / self.len() as f64;
        for (row, &y) in self.data.rows.iter().zip(&self.data.labels) {
            row.axpy_into(-y * sigmoid(-y * row.dot(x)) * inv_r, out);
        }
    }

    fn draw_gradient(&self, x: &[f64], rng: &mut RngStream, out: &mut [f64]) {
        let i = rng.random_range(0..self.len());
        self.component_gradient(i, x, out);
    }

    fn accumulate_draws(
        &self,
        x: &[f64],
        m: usize,
        rng: &mut RngStream,
        _scratch: &mut [f64],
        acc: &mut [f64],
    ) {
        for _ in 0..m {
            let i = rng.random_range(0..self.len());
            let y = self.data.labels[i];
            let row = &self.data.rows[i];
            row.axpy_into(-y * sigmoid(-y * row.dot(x)), acc);
        }
    }
}

#[inline]
fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + exp(t))` without overflow.
#[inline]
fn softplus(t: f64) -> f64 {
    if t > 0.0 {
        t + (-t).exp().ln_1p()
    } else {
        t.exp().ln_1p()
    }
}

/// Largest eigenvalue of `A^T A` by power iteration from a fixed random start.
pub fn max_eigenvalue_gram(data: &SparseDataset) -> f64 {
    let n = data.dimension;
    let mut rng = RngStream::new(POWER_ITERATION_SEED, 0);
    let mut v: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
    normalize(&mut v);
    let mut estimate = 0.0;
    let mut w = vec![0.0; n];
    for _ in 0..POWER_ITERATION_CAP {
        w.iter_mut().for_each(|x| *x = 0.0);
        for row in &data.rows {
            let av = row.dot(&v);
            row.axpy_into(av, &mut w);
        }
        // Rayleigh quotient v^T A^T A v with ||v|| = 1
        let next = crate::linalg::dot(&v, &w);
        let norm = crate::linalg::norm(&w);
        if norm == 0.0 {
            return 0.0;
        }
        w.iter().zip(v.iter_mut()).for_each(|(wi, vi)| *vi = wi / norm);
        if (next - estimate).abs() <= POWER_ITERATION_TOL * next.abs() {
            return next;
        }
        estimate = next;
    }
    estimate
}

fn normalize(v: &mut [f64]) {
    let norm = crate::linalg::norm(v);
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x /= norm);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_design_has_l_one_eighth() {
        let data =
            SparseDataset::from_dense(&[vec![1.0, 0.0], vec![0.0, 1.0]], &[1.0, 1.0]).unwrap();
        let p = make_logreg(data).unwrap();
        assert!((p.smoothness() - 0.125).abs() < 1e-6);
    }

    #[test]
    fn single_row_smoothness() {
        let data = SparseDataset::from_dense(&[vec![2.0, 0.0]], &[-1.0]).unwrap();
        let p = make_logreg(data).unwrap();
        assert!((p.smoothness() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn value_at_origin_is_ln2() {
        let data = SparseDataset::from_dense(
            &[vec![1.0, 2.0], vec![-3.0, 0.5], vec![0.0, 1.0]],
            &[1.0, -1.0, 1.0],
        )
        .unwrap();
        let p = make_logreg(data).unwrap();
        assert!((p.value(&[0.0, 0.0]).unwrap() - std::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn balanced_identical_rows_cancel() {
        let data =
            SparseDataset::from_dense(&[vec![1.0, -2.0], vec![1.0, -2.0]], &[1.0, -1.0]).unwrap();
        let p = make_logreg(data).unwrap();
        let g = p.full_gradient(&[0.0, 0.0]).unwrap();
        assert_eq!(g.as_slice(), &[0.0, 0.0]);
    }

    #[test]
    fn component_gradient_formula() {
        let data = SparseDataset::from_dense(&[vec![1.0, 2.0]], &[-1.0]).unwrap();
        let p = make_logreg(data).unwrap();
        let x = [0.3, -0.7];
        let z: f64 = 0.3 - 1.4;
        let coef = 1.0 / (1.0 + (-z).exp()); // -y / (1 + exp(y z)) with y = -1
        let mut g = [0.0; 2];
        p.component_gradient(0, &x, &mut g);
        assert!((g[0] - coef).abs() < 1e-15 && (g[1] - 2.0 * coef).abs() < 1e-15);
    }

    #[test]
    fn softplus_is_stable() {
        assert!((softplus(800.0) - 800.0).abs() < 1e-12);
        assert!(softplus(-800.0) >= 0.0 && softplus(-800.0) < 1e-300);
        assert!((sigmoid(-800.0)).abs() < 1e-300);
    }

    #[test]
    fn rejects_empty_and_zero_data() {
        assert!(make_logreg(SparseDataset::default()).is_err());
        let data = SparseDataset::from_dense(&[vec![0.0, 0.0]], &[1.0]).unwrap();
        assert!(make_logreg(data).is_err());
    }
}
