//! Configuration-driven front end for `dephasing-core`.

pub mod config;
pub mod run;

pub use config::{Mode, ScenarioConfig};
pub use run::{load_config, run, Failure, Outcome, RunOptions};
