//! Experiment runner for the mclab laboratory: configuration, deterministic
//! seeding, artifact persistence and the statistical-stability sweep.

pub mod carrier_csv;
pub mod config;
pub mod experiments;
pub mod output;
pub mod sweep;

pub use config::{ConfigError, ExperimentConfig};
pub use experiments::{run, Experiment, Outcome};
