//! File formats, configuration and command line for `ilq-core`.
//!
//! * [`ilqd`]: the binary transition-dataset format.
//! * [`checkpoint`]: model snapshots on disk.
//! * [`jsonl`]: JSON-lines import.
//! * [`config`]: TOML run configuration with desk/paper profiles.
//! * [`metrics`]: the per-evaluation `metrics.csv`.
//! * [`tabular_report`]: the batch operator audit behind `verify-tabular`.
//! * [`cli`]: subcommand dispatch.

pub mod checkpoint;
pub mod cli;
pub mod config;
mod container;
pub mod error;
pub mod ilqd;
pub mod jsonl;
pub mod metrics;
pub mod tabular_report;

pub use error::{IoError, Result};
