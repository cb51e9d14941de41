//! Linear-quadratic control of electricity generation mixes.
//!
//! The model compares two ways to serve a constant electricity demand `D`:
//! distributed capacity `X_t` built by a continuum of consumers facing a
//! quadratic installation cost and intermittency noise, and centralised
//! capacity `Q_t` built by a producer who must cover the residual demand
//! `D - X_t`. Consumers react to a unit price `P`; the producer (or a
//! social planner) reacts to the consumers. All optimisation problems are
//! linear-quadratic with a mean-field (law-dependent) variance penalty, so
//! optimal feedbacks come from scalar and 2x2 algebraic Riccati equations
//! and every trajectory is a sum of exponentials.
//!
//! Module map:
//! - [`params`]: constants, unit conventions, validation.
//! - [`expsum`] / [`quad`] / [`linalg`] / [`rng`]: numeric kernels.
//! - [`riccati`]: scalar gains and the planner's 2x2 Riccati system.
//! - [`price`]: exogenous price models (constant, martingale, OU).
//! - [`consumer`] / [`firm`] / [`planner`]: optimal feedbacks, mean
//!   trajectories, values.
//! - [`equilibrium`]: Pareto and Stackelberg prices, orderings,
//!   calibration, the benchmark price/quantity table.
//! - [`montecarlo`]: path simulation and optimality probes.
//! - [`config`]: scenario files for the command-line runner.

pub mod config;
pub mod consumer;
pub mod equilibrium;
pub mod error;
pub mod expsum;
pub mod firm;
pub mod linalg;
pub mod montecarlo;
pub mod params;
pub mod planner;
pub mod price;
pub mod quad;
pub mod riccati;
pub mod rng;

pub use error::{Error, Result};
pub use params::ModelParams;
