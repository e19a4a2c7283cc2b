//! Minimal CPU tensor/layer engine with exact reverse-mode gradients.
//!
//! Models are sequential stacks of [`Layer`]s over `[N, C, H, W]` batches ending in a
//! single sigmoid unit. Everything is generic over [`Scalar`] so the same code runs in
//! `f32` for training and in `f64` for gradient checking.

mod adam;
mod layer;
mod loss;
mod model;
mod tensor;
pub mod train;
pub mod weights;

pub use self::adam::{adam_step, adam_update, AdamConfig, AdamState};
pub use self::layer::{BackwardMode, Layer, LayerCache, LayerKind};
pub use self::loss::{bce_batch, bce_loss, PROB_CLAMP};
pub use self::model::{build_transfer_model, ActivationRecord, Backbone, Forward, Gradients, Model, Span, HEAD_WIDTH, TINYNET_FEATURE_GAIN, TINYNET_MIN_SIDE};
pub use self::tensor::{Scalar, Tensor};
pub use self::train::{predict, predict_batch, predict_set, stratified_order, train, train_with_monitor, EarlyStopping, EpochEval, EpochLog, Samples, TrainConfig, TrainLog};
pub use self::weights::{load_partial_weights, load_weights, save_weights};

use std::path::Path;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum NnError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("activation record does not match the current model parameters")]
    StaleRecord,
    #[error("backbone does not end in a convolutional feature map")]
    NoConvOutput,
    #[error("invalid architecture: {0}")]
    InvalidArchitecture(String),
    #[error("not a CTXW weights file")]
    BadMagic,
    #[error("weights format version {found} is not supported (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },
    #[error("tensor {name}: file has shape {found:?}, model expects {expected:?}")]
    WeightShapeMismatch {
        name: String,
        found: Vec<usize>,
        expected: Vec<usize>,
    },
    #[error("weights file has no tensor {0}")]
    MissingTensor(String),
    #[error("weights file is truncated")]
    TruncatedWeights,
    #[error("corrupt weights file: {0}")]
    CorruptWeights(String),
    #[error("empty dataset: {0}")]
    EmptyDataset(String),
    #[error("invalid training configuration: {0}")]
    InvalidConfig(String),
    #[error("sample {index}: {message}")]
    Sample { index: usize, message: String },
    #[error("I/O error on {path}: {message}")]
    Io { path: String, message: String },
}

impl NnError {
    pub(crate) fn io(path: &Path, e: std::io::Error) -> Self {
        NnError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        }
    }
}
