//! Command-line driver: dataset IO, flat run configuration, parallel execution and
//! metadata-stamped CSV output over the `geodesy-core` estimators.

pub mod cache;
pub mod cli;
pub mod commands;
pub mod config;
pub mod error;
pub mod io;
pub mod parallel;

pub use cli::{dispatch, EXIT_NUMERICAL, EXIT_OK, EXIT_USAGE};
pub use config::{validate_config, Command, ConfigErrors, Resolved, RunConfig};
pub use error::CliError;
