//! Experiment harness for the `dpfed` simulator.
//!
//! Turns a flat TOML config into an execution plan (variants times
//! seeds), runs it through the core crate, and writes metric CSVs,
//! bound traces and reports, trajectory projections, and a JSON
//! summary. Also hosts the standalone verification suites and grid
//! sweeps.

pub mod config;
pub mod error;
pub mod plan;
pub mod runner;
pub mod sweep;
pub mod verify;

pub use error::{CliError, Result};
