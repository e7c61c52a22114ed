//! IO, file formats, experiment driver and CLI support for `fnde-core`.

pub mod checkpoint;
pub mod config;
pub mod dataset;
pub mod error;
pub mod experiments;
pub mod plot;
pub mod report;

pub use error::{Error, Result};
pub use experiments::{run_experiment, ExperimentName, ExperimentSpec};
pub use report::ExperimentReport;
