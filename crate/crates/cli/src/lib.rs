//! Experiment runner for the `sigtail` library: subcommands with config
//! files, seeds and reproducible CSV/JSON outputs.

pub mod cli;
pub mod commands;
pub mod config;
pub mod error;
pub mod manifest;
pub mod verify;

pub use cli::Cli;
pub use error::CliError;
