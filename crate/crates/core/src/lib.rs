//! Clipped stochastic first-order methods for smooth convex problems with
//! heavy-tailed gradient noise.
//!
//! The crate provides
//!
//! * the stochastic oracle abstraction ([`oracle`]) with two concrete problems
//!   ([`problems`]): a noisy quadratic and finite-sum logistic regression;
//! * zero-mean, unit-variance noise generators with Gaussian, Weibull and
//!   Burr XII tails ([`noise`]);
//! * the clip operator and Monte-Carlo estimators of the clipped-estimator
//!   statistics ([`clipping`]);
//! * theorem-driven parameter schedules ([`schedules`]);
//! * clipped-SGD and clipped-SSTM ([`optimizers`]) and their restarted variants
//!   ([`restarts`]);
//! * trajectory and noise diagnostics ([`diagnostics`]);
//! * a seeded, parallel experiment harness ([`experiment`]) and the acceptance
//!   checks ([`verify`]).

pub mod clipping;
pub mod diagnostics;
pub mod error;
pub mod experiment;
pub mod linalg;
pub mod noise;
pub mod optimizers;
pub mod oracle;
pub mod problems;
pub mod restarts;
pub mod rng;
pub mod schedules;
pub mod svg;
pub mod verify;

pub use error::{Error, Result};
pub use linalg::Vector;
pub use noise::{NoiseFamily, NoiseModel};
pub use oracle::{Optimum, StochasticOracle};
pub use rng::RngStream;
