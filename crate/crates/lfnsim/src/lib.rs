//! Deterministic discrete-event simulator for guaranteed-bandwidth long fat
//! networks: fixed-congestion-window transport under application-level
//! bandwidth control, impaired links, and a PAUSE-capable multiplexing
//! switch, with a scenario/sweep harness for reproducible experiments.

pub mod config;
pub mod controller;
pub mod engine;
pub mod net;
pub mod optimum;
pub mod policy;
pub mod report;
pub mod sweep;
pub mod transport;
pub mod world;

pub use config::{load_and_resolve, resolve, Resolved, ScenarioFile};
pub use engine::{Engine, RngStream, SimTime};
pub use world::{run_scenario, run_with_seed, RunResult};
