//! Experiment runner, file formats and command-line support for nested
//! bandit simulations.

pub mod config;
pub mod output;
pub mod runner;
pub mod script;
pub mod stats;
pub mod tree_file;
pub mod verify;

pub use config::ExperimentConfig;
pub use runner::{run_experiment, run_single, ExperimentResult, RunRecord, TrajectoryRow};
pub use stats::{summarize_values, Summary};
pub use tree_file::TreeFile;
