//! Config-driven experiment runner behind the `bethe-transport` binary.

pub mod config;
pub mod output;
pub mod runner;

pub use config::{ExperimentConfig, Mode};
pub use runner::{run, RunOptions, RunOutcome, EXIT_CHECK_FAILED, EXIT_INVALID, EXIT_NUMERIC, EXIT_OK, OUT_ENV};
