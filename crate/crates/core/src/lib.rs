//! Controller provisioning for three-layer LEO/MEO satellite networks.
//!
//! LEO satellites form the data plane, MEO satellites act as domain
//! controllers and one MEO is the senior controller. [`netmodel`] scores an
//! assignment of LEOs to controllers; [`agent`] learns to improve it with a
//! graph-encoder actor-critic trained by PPO, and [`baselines`] provides
//! exhaustive, local-search and genetic reference solvers.

pub mod agent;
pub mod baselines;
pub mod bench;
pub mod constellation;
pub mod env;
pub mod error;
pub mod netmodel;
pub mod traffic;

pub use error::{Error, Result};
