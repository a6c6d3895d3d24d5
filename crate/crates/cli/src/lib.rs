//! Configuration loading and command dispatch behind the `kpplab` binary.

pub mod commands;
pub mod config;

pub use commands::{dispatch, CliError, CommandArgs, Dispatched};
pub use config::{parse_config, ConfigError, Experiment, Overrides, RunConfig};
