//! From-scratch 1D-CNN: tensors, layer kernels with backward passes,
//! weighted binary cross-entropy, Adam and a seeded training loop.

mod adam;
pub mod layers;
mod model;
mod tensor;
mod train;

use thiserror::Error;

pub use adam::{adam_step, AdamState};
pub use model::{
    model_forward, predict, ActivationPattern, ConvBlock, DenseLayer, Gradients, Mode, ModelConfig, ModelParams,
    Network, N_CONV_BLOCKS, POOL_SIZE,
};
pub use tensor::{Scalar, Tensor};
pub use train::{train_model, EpochRecord, History, LabeledSet, TrainConfig, TrainOutcome};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NnError {
    #[error("shape error: {0}")]
    ShapeError(String),
    #[error("batch norm needs at least 2 samples in train mode, got {0}")]
    BatchTooSmall(usize),
    #[error("state error: {0}")]
    StateError(String),
    #[error("degenerate label distribution: {normal} normal, {abnormal} abnormal")]
    DegenerateDistribution { normal: usize, abnormal: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}
