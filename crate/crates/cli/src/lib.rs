//! Library side of the `rectify` command: configuration, the pipeline steps
//! behind each subcommand, and SVG rendering.

pub mod commands;
pub mod config;
pub mod error;
pub mod svg;

pub use config::ExperimentConfig;
pub use error::{CliError, CliResult};
