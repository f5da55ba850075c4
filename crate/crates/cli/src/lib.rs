//! IO, file formats and the command-line driver for `arma-core`.
//!
//! - [`csv_io`]: series tables as CSV
//! - [`checkpoint`]: versioned binary parameter snapshots
//! - [`config`]: JSON run configuration
//! - [`pipeline`]: split → standardize → window → train → evaluate
//! - [`commands`]: the `train`, `eval`, `ablate`, `probe` and `synth` subcommands

pub mod checkpoint;
pub mod commands;
pub mod config;
pub mod csv_io;
pub mod error;
pub mod pipeline;

pub use error::{CliError, Result};
