//! Discrete-round simulator for energy-aware cluster-head election in
//! wireless sensor networks with heterogeneous batteries.
//!
//! The election strategies live in [`election`]; [`engine`] drives rounds
//! over a [`config::ScenarioConfig`] and [`report`] writes the results.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod election;
pub mod energy;
pub mod engine;
pub mod metrics;
pub mod report;
pub mod topology;

pub use config::{parse_config, ScenarioConfig};
pub use election::Algorithm;
pub use engine::{run_simulation, Simulation, SimulationReport};
