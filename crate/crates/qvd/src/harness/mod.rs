//! Experiment harness: configuration schema, deterministic runner, and
//! artifact emitters behind the `qvd` command-line interface.

pub mod config;
pub mod report;
pub mod runner;

pub use config::{load_config, ExperimentConfig, RunManifest, StateDescriptor};
pub use report::{error_curve_csv, moments_csv, romberg_csv, write_atomic, MomentRow};
pub use runner::{report_moments, resolve_threads, run_experiment};
