//! Config loading, subcommands and CSV output for the `stringnet` binary.

pub mod commands;
pub mod config;
pub mod error;
pub mod table;

pub use config::RunConfig;
pub use error::{exit, CliError};
