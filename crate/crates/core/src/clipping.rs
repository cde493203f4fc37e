//! The clip operator `clip(g, lambda) = min{1, lambda / ||g||} g` and Monte-Carlo
//! estimators of the clipped mini-batch estimator's statistics.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{CompensatedSum, Vector};
use crate::oracle::{minibatch_into, StochasticOracle};
use crate::rng::RngStream;

/// Euclidean norm that stays finite for vectors whose plain sum of squares
/// would overflow.
fn robust_norm(g: &[f64]) -> f64 {
    let plain = crate::linalg::norm(g);
    if plain.is_finite() {
        return plain;
    }
    let scale = g.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    if !scale.is_finite() {
        return plain;
    }
    scale * g.iter().map(|v| (v / scale) * (v / scale)).sum::<f64>().sqrt()
}

/// Clips `g` in place and reports whether clipping was active (`||g|| > lambda`).
///
/// `lambda = +inf` is the "no clipping" sentinel and leaves `g` untouched.
/// The zero vector is its own clip. The result never exceeds `lambda` in
/// norm, even after rounding.
#[inline]
pub fn clip_in_place(g: &mut [f64], lambda: f64) -> bool {
    debug_assert!(lambda > 0.0);
    if lambda == f64::INFINITY {
        return false;
    }
    let norm = robust_norm(g);
    if !(norm > lambda) {
        return false;
    }
    let factor = lambda / norm;
    g.iter_mut().for_each(|v| *v *= factor);
    // Rounding can leave the scaled vector a few ulps outside the ball.
    let mut shrink = 1.0 - f64::EPSILON;
    while crate::linalg::norm(g) > lambda {
        g.iter_mut().for_each(|v| *v *= shrink);
        shrink *= shrink;
    }
    true
}

/// `min{1, lambda / ||g||} g`.
pub fn clip(g: &[f64], lambda: f64) -> Result<Vector> {
    check_lambda(lambda)?;
    let mut out = g.to_vec();
    clip_in_place(&mut out, lambda);
    Ok(Vector::from_vec(out))
}

pub(crate) fn check_lambda(lambda: f64) -> Result<()> {
    if lambda > 0.0 {
        Ok(())
    } else {
        Err(Error::invalid("lambda", format!("clipping level must be positive, got {lambda}")))
    }
}

/// Monte-Carlo estimates of the clipped mini-batch estimator's statistics at a
/// fixed point, with standard errors for the three expectation-type quantities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClippedEstimatorStats {
    /// `max_j ||c_j - mean(c)||`
    pub magnitude_max: f64,
    /// `||mean(c) - grad f(x)||`
    pub bias_norm: f64,
    /// mean of `||c_j - grad f(x)||^2`
    pub distortion_msq: f64,
    /// mean of `||c_j - mean(c)||^2` (unbiased `1/(T-1)` normalisation)
    pub variance_msq: f64,
    pub bias_se: f64,
    pub distortion_se: f64,
    pub variance_se: f64,
    pub lambda: f64,
    pub m: usize,
    pub samples_used: usize,
    /// Fraction of draws with `||minibatch|| > lambda`.
    pub clip_rate: f64,
}

/// Upper bounds for the clipped estimator when `||grad f(x)|| <= lambda / 2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClippedEstimatorBounds {
    pub magnitude: f64,
    pub bias: f64,
    pub distortion: f64,
    pub variance: f64,
}

impl ClippedEstimatorBounds {
    /// `2 lambda`, `4 sigma^2 / (m lambda)`, `18 sigma^2 / m`, `18 sigma^2 / m`.
    pub fn new(sigma_sq: f64, lambda: f64, m: usize) -> Self {
        let m = m as f64;
        ClippedEstimatorBounds {
            magnitude: 2.0 * lambda,
            bias: 4.0 * sigma_sq / (m * lambda),
            distortion: 18.0 * sigma_sq / m,
            variance: 18.0 * sigma_sq / m,
        }
    }
}

/// Which of the bounds a set of estimates satisfies, allowing `k_se` standard
/// errors of Monte-Carlo slack on the expectation-type quantities.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoundCheck {
    pub magnitude: bool,
    pub bias: bool,
    pub distortion: bool,
    pub variance: bool,
}

impl BoundCheck {
    pub fn all(&self) -> bool {
        self.magnitude && self.bias && self.distortion && self.variance
    }
}

impl ClippedEstimatorStats {
    pub fn check(&self, bounds: &ClippedEstimatorBounds, k_se: f64) -> BoundCheck {
        BoundCheck {
            magnitude: self.magnitude_max <= bounds.magnitude + 1e-12,
            bias: self.bias_norm <= bounds.bias + k_se * self.bias_se,
            distortion: self.distortion_msq <= bounds.distortion + k_se * self.distortion_se,
            variance: self.variance_msq <= bounds.variance + k_se * self.variance_se,
        }
    }
}

/// Draws `trials` independent clipped mini-batch estimators
/// `c_j = clip(minibatch(x, m), lambda)` and summarises them.
///
/// Requires `||grad f(x)|| <= lambda / 2`, the regime in which the bias and
/// variance bounds apply.
pub fn estimate_clipped_stats<O: StochasticOracle + ?Sized>(
    oracle: &O,
    x: &[f64],
    lambda: f64,
    m: usize,
    trials: usize,
    rng: &mut RngStream,
) -> Result<ClippedEstimatorStats> {
    check_lambda(lambda)?;
    if m == 0 {
        return Err(Error::invalid("m", "batch size must be at least 1"));
    }
    if trials < 1000 {
        return Err(Error::invalid("trials", "at least 1000 trials are required"));
    }
    let full = oracle.full_gradient(x)?;
    let grad_norm = full.norm();
    if grad_norm > lambda / 2.0 {
        return Err(Error::Precondition(format!(
            "||grad f(x)|| = {grad_norm} exceeds lambda / 2 = {}",
            lambda / 2.0
        )));
    }

    let n = x.len();
    let mut draws = Vec::with_capacity(trials * n);
    let mut g = vec![0.0; n];
    let mut scratch = vec![0.0; n];
    let mut sum = CompensatedSum::new(n);
    let mut clipped = 0usize;
    for _ in 0..trials {
        minibatch_into(oracle, x, m, rng, &mut scratch, &mut g)?;
        if clip_in_place(&mut g, lambda) {
            clipped += 1;
        }
        sum.add(&g);
        draws.extend_from_slice(&g);
    }
    let mean = sum.mean().expect("trials > 0");

    let mut distortion = Vec::with_capacity(trials);
    let mut spread = Vec::with_capacity(trials);
    let mut magnitude_max = 0.0_f64;
    for c in draws.chunks_exact(n) {
        let d_full: f64 = c.iter().zip(full.iter()).map(|(a, b)| (a - b) * (a - b)).sum();
        let d_mean: f64 = c.iter().zip(mean.iter()).map(|(a, b)| (a - b) * (a - b)).sum();
        magnitude_max = magnitude_max.max(d_mean.sqrt());
        distortion.push(d_full);
        spread.push(d_mean);
    }
    let t = trials as f64;
    let (distortion_msq, distortion_sd) = mean_and_sd(&distortion);
    let (spread_mean, spread_sd) = mean_and_sd(&spread);
    let variance_msq = spread_mean * t / (t - 1.0);

    Ok(ClippedEstimatorStats {
        magnitude_max,
        bias_norm: mean.distance(&full),
        distortion_msq,
        variance_msq,
        bias_se: (variance_msq / t).sqrt(),
        distortion_se: distortion_sd / t.sqrt(),
        variance_se: spread_sd * t / (t - 1.0) / t.sqrt(),
        lambda,
        m,
        samples_used: trials * m,
        clip_rate: clipped as f64 / t,
    })
}

fn mean_and_sd(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::{NoiseFamily, NoiseModel};
    use crate::problems::make_toy;

    #[test]
    fn clip_examples() {
        assert_eq!(clip(&[3.0, 4.0], 10.0).unwrap().as_slice(), &[3.0, 4.0]);
        let c = clip(&[3.0, 4.0], 1.0).unwrap();
        assert!((c[0] - 0.6).abs() < 1e-15 && (c[1] - 0.8).abs() < 1e-15);
        assert_eq!(clip(&[0.0, 0.0], 1.0).unwrap().as_slice(), &[0.0, 0.0]);
    }

    #[test]
    fn clip_rejects_nonpositive_lambda() {
        assert!(clip(&[1.0], 0.0).is_err());
        assert!(clip(&[1.0], -1.0).is_err());
        assert!(clip(&[1.0], f64::NAN).is_err());
    }

    #[test]
    fn infinite_lambda_is_identity() {
        let mut g = [1e300, -1e300, 3.0];
        assert!(!clip_in_place(&mut g, f64::INFINITY));
        assert_eq!(g, [1e300, -1e300, 3.0]);
    }

    #[test]
    fn activation_flag() {
        let mut g = [3.0, 4.0];
        assert!(!clip_in_place(&mut g, 5.0));
        assert!(clip_in_place(&mut g, 4.999));
    }

    #[test]
    fn overflowing_norm_still_clips() {
        let mut g = [1e200, 1e200];
        assert!(clip_in_place(&mut g, 1.0));
        assert!(crate::linalg::norm(&g) <= 1.0);
        assert!((g[0] - g[1]).abs() < 1e-15);
    }

    #[test]
    fn noiseless_stats_are_zero() {
        let toy = make_toy(3, None).unwrap();
        let mut rng = RngStream::new(1, 0);
        let s = estimate_clipped_stats(&toy, &[0.1, 0.2, 0.0], 1.0, 4, 1000, &mut rng).unwrap();
        assert_eq!(s.bias_norm, 0.0);
        assert_eq!(s.distortion_msq, 0.0);
        assert_eq!(s.variance_msq, 0.0);
        assert_eq!(s.magnitude_max, 0.0);
        assert_eq!(s.samples_used, 4000);
    }

    #[test]
    fn precondition_is_checked() {
        let toy = make_toy(1, None).unwrap();
        let mut rng = RngStream::new(1, 0);
        let e = estimate_clipped_stats(&toy, &[1.0], 1.0, 1, 1000, &mut rng).unwrap_err();
        assert!(matches!(e, Error::Precondition(_)));
        assert!(estimate_clipped_stats(&toy, &[0.0], 1.0, 1, 999, &mut rng).is_err());
    }

    #[test]
    fn gaussian_bias_within_bound() {
        let n = 4;
        let noise = NoiseModel::new(NoiseFamily::Gaussian, n).unwrap();
        let toy = make_toy(n, Some(noise)).unwrap();
        let sigma_sq = toy.variance_bound();
        let lambda = 10.0 * sigma_sq.sqrt();
        let x = [0.5, 0.0, 0.0, 0.0];
        let mut rng = RngStream::new(5, 0);
        let s = estimate_clipped_stats(&toy, &x, lambda, 1, 10_000, &mut rng).unwrap();
        let b = ClippedEstimatorBounds::new(sigma_sq, lambda, 1);
        assert!(s.check(&b, 3.0).all(), "{s:?} vs {b:?}");
    }
}
