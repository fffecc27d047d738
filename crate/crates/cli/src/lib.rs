//! Experiment runner: declarative TOML configs drive the tracker,
//! surrogate construction, and metric evaluation, producing append-only
//! artifact directories and plot-ready CSV series.

pub mod config;
pub mod pipeline;
pub mod plot;

pub use config::{CliError, ExperimentConfig};
pub use pipeline::{run_experiment, RunOutput};
