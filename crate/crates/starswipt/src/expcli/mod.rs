//! Experiment harness: configuration, Monte-Carlo sweeps, and the command
//! line.

pub mod config;

pub use config::{ConfigError, ObjectiveMode, SatGainMode, Scheme, SweepAxis, SystemConfig};
