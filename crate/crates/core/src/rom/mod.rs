//! LSTM encoder–decoder reduced-order model of displacement series.
//!
//! The encoder reads a window of `(normalized time, normalized rate)` pairs;
//! its final state seeds a decoder that emits one normalized displacement
//! per step through a linear head. Training uses Adam on window MSE with
//! backpropagation through time written out by hand in [`network`].

mod adam;
mod cell;
mod model;
mod network;
mod train;

use thiserror::Error;

use crate::series::SeriesError;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use cell::LstmLayer;
pub use model::{reconstruct, rom_evaluate, Reconstruction, RomModel, MODEL_FORMAT, MODEL_VERSION};
pub use network::{
    decode, encode, forward_window, window_loss, window_loss_grad, DecoderFeed, LstmWeights, WindowTrace,
    DECODER_FEATURES, ENCODER_FEATURES, TENSOR_ORDER,
};
pub use train::{train, TrainConfig, TrainedRom, TrainingLog};

#[derive(Debug, Error)]
pub enum RomError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("non-finite values: {0}")]
    NonFinite(String),
    #[error("training diverged: loss {loss} at epoch {epoch}")]
    NonFiniteLoss { epoch: usize, loss: f64 },
    #[error("invalid training config: {0}")]
    BadConfig(String),
    #[error("inconsistent training data: {0}")]
    InconsistentDataset(String),
    #[error("evaluation times: {0}")]
    BadTimes(String),
    #[error("unsupported model document: {0}")]
    BadDocument(String),
    #[error("model json: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Series(#[from] SeriesError),
}
