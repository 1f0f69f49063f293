//! Command-line front end for `texseg`: dataset ingestion, training, batch segmentation,
//! evaluation, cross-validation and parameter sweeps.

pub mod commands;
pub mod config;
pub mod dataset;

pub use config::{ConfigArgs, Mode, RunConfig};
