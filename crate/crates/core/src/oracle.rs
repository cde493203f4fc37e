//! The stochastic first-order oracle every optimizer consumes.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{check_dim, Vector};
use crate::rng::RngStream;

/// A known (or certified reference) minimizer and its objective value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Optimum {
    pub x: Vector,
    pub value: f64,
}

/// A smooth convex objective `f(x) = E[f(x, xi)]` accessible through unbiased
/// stochastic gradients with variance at most `variance_bound()`.
///
/// Implementations are immutable after construction and shared across trial
/// workers; all randomness comes from the caller's [`RngStream`].
pub trait StochasticOracle: Send + Sync {
    fn dimension(&self) -> usize;

    /// Lipschitz constant `L` of the gradient.
    fn smoothness(&self) -> f64;

    /// Strong-convexity modulus `mu`; zero for merely convex problems.
    fn strong_convexity(&self) -> f64 {
        0.0
    }

    /// `sigma^2` bounding `E||g(x, xi) - grad f(x)||^2`.
    fn variance_bound(&self) -> f64;

    fn optimum(&self) -> Option<&Optimum> {
        None
    }

    /// `f(x)` without dimension checks.
    fn eval(&self, x: &[f64]) -> f64;

    /// Writes `grad f(x)` into `out`.
    fn eval_gradient(&self, x: &[f64], out: &mut [f64]);

    /// Writes one stochastic gradient draw into `out`.
    fn draw_gradient(&self, x: &[f64], rng: &mut RngStream, out: &mut [f64]);

    /// Adds `m` independent draws into `acc` (which the caller zeroes). The
    /// default delegates to [`StochasticOracle::draw_gradient`]; problems with
    /// cheaper batched sampling may override it.
    fn accumulate_draws(
        &self,
        x: &[f64],
        m: usize,
        rng: &mut RngStream,
        scratch: &mut [f64],
        acc: &mut [f64],
    ) {
        for _ in 0..m {
            self.draw_gradient(x, rng, scratch);
            acc.iter_mut().zip(scratch.iter()).for_each(|(a, s)| *a += s);
        }
    }

    fn value(&self, x: &[f64]) -> Result<f64> {
        check_dim(self.dimension(), x.len())?;
        Ok(self.eval(x))
    }

    fn full_gradient(&self, x: &[f64]) -> Result<Vector> {
        check_dim(self.dimension(), x.len())?;
        let mut g = Vector::zeros(x.len());
        self.eval_gradient(x, &mut g);
        Ok(g)
    }

    fn sample_gradient(&self, x: &[f64], rng: &mut RngStream) -> Result<Vector> {
        check_dim(self.dimension(), x.len())?;
        let mut g = Vector::zeros(x.len());
        self.draw_gradient(x, rng, &mut g);
        Ok(g)
    }

    /// Average of `m` independent stochastic gradients at `x`.
    fn minibatch_gradient(&self, x: &[f64], m: usize, rng: &mut RngStream) -> Result<Vector> {
        check_dim(self.dimension(), x.len())?;
        let mut out = Vector::zeros(x.len());
        let mut scratch = vec![0.0; x.len()];
        minibatch_into(self, x, m, rng, &mut scratch, &mut out)?;
        Ok(out)
    }

    /// `f(x) - f*` when the optimum is known.
    fn gap(&self, x: &[f64]) -> Option<f64> {
        self.optimum().map(|opt| self.eval(x) - opt.value)
    }

    fn distance_to_optimum(&self, x: &[f64]) -> Option<f64> {
        self.optimum().map(|opt| opt.x.distance(x))
    }
}

/// Allocation-free mini-batch average used inside optimizer loops.
pub fn minibatch_into<O: StochasticOracle + ?Sized>(
    oracle: &O,
    x: &[f64],
    m: usize,
    rng: &mut RngStream,
    scratch: &mut [f64],
    out: &mut [f64],
) -> Result<()> {
    if m == 0 {
        return Err(Error::invalid("m", "batch size must be at least 1"));
    }
    if m == 1 {
        oracle.draw_gradient(x, rng, out);
        return Ok(());
    }
    out.iter_mut().for_each(|v| *v = 0.0);
    oracle.accumulate_draws(x, m, rng, scratch, out);
    let inv = 1.0 / m as f64;
    out.iter_mut().for_each(|v| *v *= inv);
    Ok(())
}
