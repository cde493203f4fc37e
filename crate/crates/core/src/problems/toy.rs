use crate::error::{Error, Result};
use crate::linalg::Vector;
use crate::noise::NoiseModel;
use crate::oracle::{Optimum, StochasticOracle};
use crate::rng::RngStream;

/// `f(x) = ||x||^2 / 2` observed through `grad f(x, xi) = x + xi`.
///
/// `L = mu = 1`, `x* = 0`, `f* = 0`, and `sigma^2 = n` for unit-variance noise
/// (zero without noise).
#[derive(Debug, Clone)]
pub struct QuadraticToyProblem {
    dimension: usize,
    noise: Option<NoiseModel>,
    optimum: Optimum,
}

impl QuadraticToyProblem {
    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn noise(&self) -> Option<&NoiseModel> {
        self.noise.as_ref()
    }
}

/// Noisy quadratic of dimension `n`. `noise = None` gives exact gradients.
pub fn make_toy(n: usize, noise: Option<NoiseModel>) -> Result<QuadraticToyProblem> {
    if n == 0 {
        return Err(Error::invalid("n", "dimension must be at least 1"));
    }
    if let Some(model) = &noise {
        if model.dimension != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                actual: model.dimension,
            });
        }
    }
    Ok(QuadraticToyProblem {
        dimension: n,
        noise,
        optimum: Optimum {
            x: Vector::zeros(n),
            value: 0.0,
        },
    })
}

impl StochasticOracle for QuadraticToyProblem {
    fn dimension(&self) -> usize {
        self.dimension
    }

    fn smoothness(&self) -> f64 {
        1.0
    }

    fn strong_convexity(&self) -> f64 {
        1.0
    }

    fn variance_bound(&self) -> f64 {
        if self.noise.is_some() {
            self.dimension as f64
        } else {
            0.0
        }
    }

    fn optimum(&self) -> Option<&Optimum> {
        Some(&self.optimum)
    }

    fn eval(&self, x: &[f64]) -> f64 {
        0.5 * x.iter().map(|v| v * v).sum::<f64>()
    }

    fn eval_gradient(&self, x: &[f64], out: &mut [f64]) {
        out.copy_from_slice(x);
    }

    fn draw_gradient(&self, x: &[f64], rng: &mut RngStream, out: &mut [f64]) {
        out.copy_from_slice(x);
        if let Some(noise) = &self.noise {
            noise.add_to(rng, out);
        }
    }

    fn accumulate_draws(
        &self,
        x: &[f64],
        m: usize,
        rng: &mut RngStream,
        _scratch: &mut [f64],
        acc: &mut [f64],
    ) {
        // Same draw order as m calls of draw_gradient.
        for _ in 0..m {
            acc.iter_mut().zip(x).for_each(|(a, xi)| *a += xi);
            if let Some(noise) = &self.noise {
                noise.add_to(rng, acc);
            }
        }
    }
}
