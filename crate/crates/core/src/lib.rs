//! Online learning of expert weights for logarithmic opinion pooling.
//!
//! Experts report probability forecasts over `n` outcomes; the pool is the
//! normalized weighted geometric mean of the reports. Weights are learned by
//! online mirror descent with the power regularizer `-(1/α) Σ w_i^α`, and the
//! simulator pits the learner against calibrated (and deliberately
//! uncalibrated) adversaries so its regret can be measured against the best
//! weights in hindsight.
//!
//! Module map:
//! - [`pooling`]: weighted log pool, log loss and its gradient in the weights.
//! - [`mirror_descent`]: regularizer, step-size schedule, mirror step, learner loop.
//! - [`calibrated_world`]: information structures, calibration checks, adversaries.
//! - [`hindsight`]: best fixed weights in hindsight and regret.
//! - [`diagnostics`]: gradient monitor, potential function, weight-bound checks.
//! - [`experiment`]: configs, Monte Carlo runs, CSV output, CLI commands.

pub mod calibrated_world;
pub mod diagnostics;
pub mod error;
pub mod experiment;
pub mod hindsight;
pub mod mirror_descent;
pub mod pooling;

pub use error::{Error, Result};
