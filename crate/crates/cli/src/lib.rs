//! Config-driven experiment runner: simulate input streams, sweep artifact
//! grids through reconstructors, and merge the resulting reports.

pub mod config;
pub mod grid;
pub mod merge;
pub mod runner;

pub use config::{load_config, CartesianSource, ExperimentConfig, GridSpec, TrainingSource};
pub use grid::{expand, GridPoint};
pub use merge::{merge_reports, read_report_file};
pub use runner::{run_simulate, run_sweep, trend_violations, Failure, RunManifest, RunOptions, RunOutcome};
