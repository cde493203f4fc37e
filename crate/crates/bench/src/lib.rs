//! Shared fixtures for the criterion benchmarks in `benches/`.

use clipopt::problems::{make_logreg, make_toy, LogisticRegressionProblem, QuadraticToyProblem};
use clipopt::verify::heart_like_dataset;
use clipopt::{NoiseFamily, NoiseModel};

/// Dimension of the toy problem used by the step benchmarks.
pub const TOY_DIM: usize = 100;

/// The quadratic toy problem in `TOY_DIM` dimensions with the given noise.
pub fn toy(family: NoiseFamily) -> QuadraticToyProblem {
    let noise = NoiseModel::new(family, TOY_DIM).expect("valid noise model");
    make_toy(TOY_DIM, Some(noise)).expect("valid toy problem")
}

/// Logistic regression on a 270 x 13 synthetic dataset shaped like `heart`.
pub fn heart_like() -> LogisticRegressionProblem {
    make_logreg(heart_like_dataset(1).expect("synthetic dataset")).expect("valid problem")
}
