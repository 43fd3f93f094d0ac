//! Neural edit predictor: a bidirectional LSTM encoder shared by five
//! per-use-case head triples (replacement detection, replacement
//! resolution, deletion), trained jointly with Adam.
//!
//! Everything numeric is generic over [`Real`]; training runs in `f32`,
//! gradient checks in `f64`.

pub mod checkpoint;
pub mod config;
pub mod decode;
pub mod embeddings;
pub mod loss;
pub mod network;
pub mod params;
pub mod rewriter;
pub mod tensor;
pub mod train;
pub mod vocab;

use thiserror::Error;

use crate::edit_engine::EngineError;

pub use config::{EmbeddingMode, ModelConfig, NUM_USE_CASES};
pub use decode::{decode, HeadOutputs};
pub use loss::{compute_loss, ForwardOutput, LabelTensors, LossBreakdown, PointerLabel};
pub use network::{batch_loss, encode, forward, gradients, heads_forward, Sample};
pub use params::Params;
pub use rewriter::{apply_fail_soft, Prediction, Rewriter};
pub use tensor::{Mat, Real};
pub use train::{train, EpochLog, TrainOutcome};
pub use vocab::Vocab;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("invalid labels: {0}")]
    Label(String),
    #[error("input length {len} outside 1..={max}")]
    Length { len: usize, max: usize },
    #[error("empty batch")]
    EmptyBatch,
    #[error("training diverged: {0}")]
    Divergence(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("embeddings: {0}")]
    Embeddings(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Engine(#[from] EngineError),
}
