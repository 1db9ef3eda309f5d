//! Scenario-file driver for `cavity-node`.
//!
//! A scenario (see [`config`]) names a photon, a node and a grid; [`run`]
//! executes one of the verbs on it and writes CSV series plus a text and a
//! JSON report into the output directory.

pub mod config;
pub mod output;
pub mod run;

pub use config::{load_config, parse_config, ConfigError, RunMode, ScenarioConfig};
pub use output::{RunReport, Verdict};
pub use run::{run, sweep_rows, RunError, RunOptions, SweepRow};
