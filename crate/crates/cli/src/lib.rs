//! Front end for the `bellman` binary: configuration and subcommands.

pub mod commands;
pub mod config;
pub mod error;

pub use error::{CliError, Result};
