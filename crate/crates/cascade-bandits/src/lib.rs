//! Simulation library for cascading bandits in piecewise-stationary
//! environments: a likelihood-ratio change-point detector, change-detecting
//! and baseline ranking policies, configurable environments, and a
//! deterministic Monte Carlo experiment harness.

pub mod changepoint;
pub mod env;
pub mod error;
pub mod harness;
pub mod math;
pub mod policy;

pub use error::{Error, Result};
