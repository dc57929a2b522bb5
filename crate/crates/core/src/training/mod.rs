//! Datasets, hyperparameter sampling, the training loop and checkpoints.

mod checkpoint;
mod dataset;
mod hyper;
mod trainer;

pub use checkpoint::{Checkpoint, CHECKPOINT_VERSION};
pub use dataset::{build_dataset, load_scenarios, split_by_base, Dataset, DatasetSplits, Sample, Split};
pub use hyper::{sample_hyperparams, tapered_widths, HyperParams};
pub use trainer::{
    constant_baseline_mse, evaluate, predictions, train, EarlyStopping, EpochRecord, StopDecision, StopReason, TrainHistory,
    TrainingLog,
};

use crate::gnn::GnnError;
use crate::graph::GraphError;
use crate::scene::ScenarioError;
use crate::tensor::{ArchiveError, TensorError};

#[derive(Debug, thiserror::Error)]
pub enum TrainingError {
    #[error("{id}: {source}")]
    Scenario {
        id: String,
        #[source]
        source: ScenarioError,
    },
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Gnn(#[from] GnnError),
    #[error("NONFINITE_LOSS at epoch {epoch}, batch {batch}: {detail}")]
    NonFiniteLoss { epoch: usize, batch: usize, detail: String },
    #[error("the {0} split is empty")]
    EmptySplit(&'static str),
    #[error("id `{id}` appears in both the {first} and {second} splits")]
    OverlappingSplits {
        id: String,
        first: &'static str,
        second: &'static str,
    },
    #[error("split manifest lists `{0}`, which is not in the dataset")]
    UnknownId(String),
    #[error("invalid hyperparameters: {0}")]
    InvalidHyperParams(String),
    #[error("VERSION_MISMATCH: checkpoint version {found}, expected {expected}")]
    VersionMismatch { found: u32, expected: u32 },
    #[error("malformed checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Archive(#[from] ArchiveError),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl From<TensorError> for TrainingError {
    fn from(e: TensorError) -> Self {
        Self::Gnn(e.into())
    }
}
