//! Linear structural probes for tree distance and tree depth.

mod loss;
mod params;
mod train;

use thiserror::Error;

pub use loss::{
    depth_loss, depth_residuals, distance_loss, distance_residuals, mixed_loss_grad, probe_loss,
    probe_loss_grad, LayeredSample, ProbeKind, ProbeSample, Residual,
};
pub use params::{predict_geometry, LayerSelector, ProbeParams};
pub use train::{train_probes, EpochRecord, ProbeDataset, TrainConfig, TrainOutcome};

use crate::embedstore::EmbeddingError;
use crate::treebank::TreeError;

#[derive(Debug, Error)]
pub enum ProbeError {
    #[error("{what}: expected {expected}, found {found}")]
    DimMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("layer {layer} out of range for {layers} layers")]
    LayerOutOfRange { layer: usize, layers: usize },
    #[error("training set is empty")]
    EmptyTrainingSet,
    #[error("sentence {sent_id} appears in both train and dev")]
    OverlappingSplits { sent_id: String },
    #[error("{} probe diverged at epoch {epoch} (loss {loss})", probe.name())]
    Diverged {
        probe: ProbeKind,
        epoch: usize,
        loss: f64,
    },
    #[error("invalid training configuration: {0}")]
    InvalidConfig(String),
    #[error("invalid probe parameters: {0}")]
    InvalidParams(String),
    #[error("sentence {sent_id}: {source}")]
    InvalidTree { sent_id: String, source: TreeError },
    #[error(transparent)]
    Embedding(#[from] EmbeddingError),
}
