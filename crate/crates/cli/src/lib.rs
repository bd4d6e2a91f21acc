//! Configuration, presets and execution behind the `qce` binary.

pub mod config;
pub mod error;
pub mod output;
pub mod presets;
pub mod runner;

pub use config::{ExperimentConfig, Model, RunType};
pub use error::{CliError, CliResult};
pub use output::RunManifest;
pub use runner::run;
