//! Parameter estimation toolkit for the Ornstein-Uhlenbeck process.
//!
//! The crate simulates OU trajectories by exact discretization and recovers
//! the parameters (theta, mu, sigma) three ways: pooled AR(1) least squares,
//! Kalman-filter maximum likelihood over the innovations, and a small
//! from-scratch neural network trained on simulated data. A benchmark
//! harness replays a grid of experiment designs with replicated seeds and
//! writes CSV tables and an SVG error chart.
//!
//! Everything is deterministic given a seed: simulation, training, the
//! benchmark grid, and all serialized artifacts.

pub mod bench;
pub mod error;
pub mod kalman;
pub mod mlp;
pub mod ols;
pub mod optim;
pub mod process;
pub mod report;
pub mod simulate;
pub mod svg;
pub mod util;

pub use bench::{run_grid, ExperimentGrid, GridResult};
pub use error::{Error, Result};
pub use kalman::{kalman_filter, kalman_mle, MleConfig, ObsNoise};
pub use mlp::{glorot_init, predict_params, train, MlpModel, TrainConfig};
pub use ols::{ols_fit, recover_params, RegressionFit};
pub use process::{OuParams, TimeGrid};
pub use report::{EstimateReport, Method};
pub use simulate::{simulate, PathSet};
