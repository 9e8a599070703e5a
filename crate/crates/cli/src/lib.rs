//! Batch driver for the simulate, train, forecast and evaluate pipeline.
//!
//! Every run lives in `<output_dir>/seed_<n>/` next to a `manifest.json`
//! holding the config, its hash, the derived seeds and a SHA-256 digest of
//! each output file.

pub mod args;
pub mod commands;
pub mod config;
pub mod error;
pub mod manifest;

pub use args::{run, Cli, Command};
pub use config::{Dgp, ExperimentConfig};
pub use error::{CliError, CliResult};
