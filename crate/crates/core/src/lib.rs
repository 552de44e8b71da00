//! Distributed online aggregative optimization for multi-robot target defense.
//!
//! A team of defender robots, each paired with one intruder, cooperatively
//! positions itself between the intruders and a protected target. Every
//! defender runs a Kalman predictor on its intruder and on the target, builds
//! a predicted local cost and a predicted feasible box, and performs one
//! projected feasible-direction step per tick while two consensus trackers
//! reconstruct the team barycenter and the aggregate gradient from neighbor
//! messages only.
//!
//! Modules map onto the pieces of the loop:
//!
//! - [`network`]: proximity graphs, Metropolis mixing weights, B-connectivity, message bus
//! - [`estimator`]: double-integrator Kalman filter in predictor form
//! - [`objectives`]: local cost, aggregation map and partial gradients
//! - [`constraints`]: between-intruder-and-target boxes and projection
//! - [`algorithm`]: per-agent state machine (init + optimize step)
//! - [`scenarios`]: trajectories, presets, world oracle
//! - [`metrics`]: centralized oracle, dynamic regret, tracker errors
//! - [`harness`]: simulation driver, config files, trace output

pub mod algorithm;
pub mod constraints;
pub mod error;
pub mod estimator;
pub mod harness;
pub mod metrics;
pub mod network;
pub mod objectives;
pub mod scenarios;

pub use error::{Error, Result};

/// Three-dimensional position/velocity vector.
pub type Vec3 = nalgebra::Vector3<f64>;
/// 3×3 weighting matrix.
pub type Mat3 = nalgebra::Matrix3<f64>;

pub(crate) fn ensure_finite(v: &Vec3, what: &str) -> Result<()> {
    if v.iter().all(|c| c.is_finite()) {
        Ok(())
    } else {
        Err(Error::Input(format!("{what} is not finite: {v:?}")))
    }
}
