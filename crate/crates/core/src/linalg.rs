//! Dense vectors for iterates and gradients.

use std::ops::{Deref, DerefMut};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A dense real vector. Optimizer state never admits NaN or infinite entries;
/// use [`Vector::is_finite`] to enforce that at step boundaries.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Vector(Vec<f64>);

impl Vector {
    pub fn zeros(n: usize) -> Self {
        Vector(vec![0.0; n])
    }

    pub fn filled(n: usize, value: f64) -> Self {
        Vector(vec![value; n])
    }

    pub fn from_vec(values: Vec<f64>) -> Self {
        Vector(values)
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    pub fn dot(&self, other: &[f64]) -> f64 {
        dot(&self.0, other)
    }

    pub fn norm_sq(&self) -> f64 {
        dot(&self.0, &self.0)
    }

    pub fn norm(&self) -> f64 {
        norm(&self.0)
    }

    pub fn scale(&mut self, factor: f64) {
        self.0.iter_mut().for_each(|v| *v *= factor);
    }

    /// `self += alpha * other`
    pub fn axpy(&mut self, alpha: f64, other: &[f64]) {
        axpy(&mut self.0, alpha, other);
    }

    pub fn distance(&self, other: &[f64]) -> f64 {
        self.0
            .iter()
            .zip(other)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }

    pub fn check_dim(&self, expected: usize) -> Result<()> {
        check_dim(expected, self.dim())
    }
}

impl From<Vec<f64>> for Vector {
    fn from(values: Vec<f64>) -> Self {
        Vector(values)
    }
}

impl Deref for Vector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl DerefMut for Vector {
    fn deref_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }
}

pub fn check_dim(expected: usize, actual: usize) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, actual })
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn axpy(y: &mut [f64], alpha: f64, x: &[f64]) {
    y.iter_mut().zip(x).for_each(|(yi, xi)| *yi += alpha * xi);
}

/// Neumaier-compensated running sum of vectors. Keeps the running average of
/// an iterate sequence accurate to a few ulps even over millions of terms.
#[derive(Debug, Clone)]
pub struct CompensatedSum {
    sum: Vec<f64>,
    comp: Vec<f64>,
    count: usize,
}

impl CompensatedSum {
    pub fn new(n: usize) -> Self {
        CompensatedSum {
            sum: vec![0.0; n],
            comp: vec![0.0; n],
            count: 0,
        }
    }

    pub fn add(&mut self, x: &[f64]) {
        for ((s, c), &v) in self.sum.iter_mut().zip(self.comp.iter_mut()).zip(x) {
            let t = *s + v;
            if s.abs() >= v.abs() {
                *c += (*s - t) + v;
            } else {
                *c += (v - t) + *s;
            }
            *s = t;
        }
        self.count += 1;
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn total(&self) -> Vector {
        Vector(self.sum.iter().zip(&self.comp).map(|(s, c)| s + c).collect())
    }

    /// Mean of everything added so far; `None` before the first term.
    pub fn mean(&self) -> Option<Vector> {
        if self.count == 0 {
            return None;
        }
        let n = self.count as f64;
        Some(Vector(
            self.sum
                .iter()
                .zip(&self.comp)
                .map(|(s, c)| (s + c) / n)
                .collect(),
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn norms_and_axpy() {
        let mut v = Vector::from_vec(vec![3.0, 4.0]);
        assert_eq!(v.norm(), 5.0);
        v.axpy(2.0, &[1.0, -1.0]);
        assert_eq!(v.as_slice(), &[5.0, 2.0]);
        assert_eq!(v.distance(&[5.0, 0.0]), 2.0);
    }

    #[test]
    fn dim_check() {
        let v = Vector::zeros(3);
        assert!(v.check_dim(3).is_ok());
        assert!(matches!(
            v.check_dim(4),
            Err(Error::DimensionMismatch { expected: 4, actual: 3 })
        ));
    }

    #[test]
    fn compensated_mean_beats_naive_sum() {
        let mut acc = CompensatedSum::new(1);
        let n = 1_000_000;
        for _ in 0..n {
            acc.add(&[0.1]);
        }
        let mean = acc.mean().unwrap()[0];
        assert!((mean - 0.1).abs() <= 1e-15, "mean = {mean}");
        assert!(CompensatedSum::new(2).mean().is_none());
    }
}
