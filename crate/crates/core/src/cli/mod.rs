//! Experiment configuration, the experiment runner and the subcommands of
//! the `fraug` binary.

#[cfg(feature = "cli")]
mod commands;
mod config;
mod experiment;

#[cfg(feature = "cli")]
pub use commands::{run, Cli};
pub use config::{ExperimentConfig, PolicyEntry};
pub use experiment::{
    predict_split, prediction_path, run_experiment, subset_manifest, CandidateResult, ExperimentOutcome, PredictionFile,
    PredictionRecord, TableRow,
};
