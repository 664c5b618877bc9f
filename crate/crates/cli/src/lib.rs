//! Command-line driver: training runs, coefficient queries, plots.

pub mod commands;
pub mod error;
pub mod manifest;
pub mod svg;

pub use commands::{run, Cli};
pub use error::{CliError, Result};
