//! The `pat` experiment runner: configuration, commands and manifests.

pub mod commands;
pub mod config;
pub mod error;
pub mod manifest;

pub use error::{CliError, CliResult};
