//! Command-line front end and HTTP session service.

pub mod commands;
pub mod config;
pub mod server;

pub use commands::{run, Cli, CliError};
