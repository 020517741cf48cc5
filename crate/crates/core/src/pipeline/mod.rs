//! Cost and heuristic prediction wired to the two differentiable solvers,
//! the combined loss, training, and inference with a single A*.

mod config;
mod loss;
mod model;
mod train;

pub use config::{EpsilonParam, NwaConfig, Variant};
pub use loss::{build_h_epsilon, hamming_grad, hamming_loss, total_loss, LossParts};
pub use model::{cell_channel, infer, run_variant, Inference, Model, ModelManifest, Prediction, MODEL_FORMAT, RAW_COST_FLOOR};
pub use train::{forward_train, map_gradients, train, train_with, write_loss_csv, LossRow, MapGradients, PairOutcome, PairRef, TrainOutput};

use crate::grid::GridError;
use crate::nn::NnError;
use crate::search::SearchError;
use std::path::PathBuf;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Search(#[from] SearchError),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error("invalid config: {0}")]
    Config(String),
    #[error("unknown variant {0:?} (expected nwa, bba, na, admna or nsna)")]
    UnknownVariant(String),
    #[error("eps must be finite and >= 0, got {0}")]
    NegativeEpsilon(f64),
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("training diverged at step {step}: {detail}")]
    Divergent { step: u64, detail: String },
    #[error("incompatible model: {0}")]
    Incompatible(String),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
}
