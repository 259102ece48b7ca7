//! Cross-validated popularity bias experiment: prepare the data, train each
//! algorithm per fold, evaluate held-out users, and write the report.

mod config;
mod output;
mod run;
mod sweep;

use std::path::PathBuf;

use thiserror::Error;

use crate::dataset::DatasetError;
use crate::metrics::MetricsError;
use crate::popularity::PopularityError;
use crate::recommenders::RecommenderError;
use crate::synth::SynthError;

pub use config::{AlgorithmsConfig, DataConfig, ExperimentConfig, HistoryMode, MetricsConfig, OutputConfig};
pub use output::{config_hash, write_outputs, POOLING_POLICY};
pub use run::{
    evaluate_fold, model_seed, prepare, records_per_algorithm, run_experiment, run_experiment_with, run_fold,
    train_fold_model, ExperimentResult, FoldOutcome, FoldSummary, Inspection, Inspector, Population, Prepared,
    UserFailure,
};
pub use sweep::{best, grid_search, SweepPoint};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config: {0}")]
    Config(String),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Popularity(#[from] PopularityError),
    #[error(transparent)]
    Synth(#[from] SynthError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Recommender(#[from] RecommenderError),
    #[error("invalid folds: {}", .0.join("; "))]
    InvalidFolds(Vec<String>),
}

impl HarnessError {
    /// Process exit status: 1 for configuration problems, 2 for bad data,
    /// 3 for failures while running the experiment.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) => 1,
            HarnessError::Io { .. } | HarnessError::Dataset(_) | HarnessError::Popularity(_) | HarnessError::Synth(_) => 2,
            HarnessError::Metrics(_) | HarnessError::Recommender(_) | HarnessError::InvalidFolds(_) => 3,
        }
    }
}
