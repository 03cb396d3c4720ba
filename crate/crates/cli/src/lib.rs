//! Configuration, parallel orchestration and file outputs for the
//! `klucb-core` simulator, plus the `klucb` command line.

pub mod commands;
pub mod config;
pub mod engine;
pub mod error;
pub mod output;

pub use config::{load, parse_config, Overrides, Resolved};
pub use error::{CliError, Result};
