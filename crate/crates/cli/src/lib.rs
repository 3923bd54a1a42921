//! Command-line front end for the lattice gas simulator: configuration
//! loading and the subcommand runners.

pub mod config;
pub mod runner;

pub use config::{load, ConfigError, RunConfig};
pub use runner::{run, Command, RunError, RunReport};
