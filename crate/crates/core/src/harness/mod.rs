//! Experiment configuration, orchestration and exports.

pub mod config;
pub mod data;
pub mod experiment;
pub mod export;
pub mod sweep;

pub use config::ExperimentConfig;
pub use data::{DatasetSpec, SubspaceData};
pub use experiment::{run_experiment, ClientResult, LossRecord, RoundSummary, RunResult};
pub use export::{export_views, pca_2d};
pub use sweep::{sweep, sweep_csv, SweepRow};
