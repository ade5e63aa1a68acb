//! Experiment runner for `ahpl-core`: JSON configs, run directories, PPM/CSV/JSON writers and
//! the subcommands of the `ahpl` binary.

pub mod config;
pub mod error;
pub mod experiments;
pub mod output;

pub use config::{ExperimentConfig, SCHEMA_VERSION};
pub use error::{LabError, LabResult};
