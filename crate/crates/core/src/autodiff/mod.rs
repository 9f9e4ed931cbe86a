//! A small reverse-mode differentiation kernel in double precision: dense
//! tensors, a recording tape, LSTM cells, losses and an Adam optimizer.

mod loss;
mod lstm;
mod optim;
mod tape;
mod tensor;

use thiserror::Error;

pub use loss::{dropout, kl_divergence, softmax, softmax_cross_entropy, KL_FLOOR};
pub use lstm::{bi_encode, lstm_cell, EncoderState, LstmParams, LstmSpec};
pub use optim::{clip_global_norm, Adam, OptimizerConfig};
pub use tape::{Tape, Var};
pub use tensor::{Gradients, ModelParameters, Tensor};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AutodiffError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("empty input sequence")]
    EmptySequence,
    #[error("gold index {gold} out of range for {classes} classes")]
    GoldOutOfRange { gold: usize, classes: usize },
    #[error("need at least 2 classes, got {0}")]
    TooFewClasses(usize),
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("dropout rate {0} outside [0, 1)")]
    BadRate(f64),
    #[error("missing parameter `{0}`")]
    MissingParameter(String),
    #[error("no gradient for parameter `{0}`")]
    MissingGradient(String),
    #[error("gradient for unknown parameter `{0}`")]
    UnknownGradient(String),
    #[error("parameter `{0}` became non-finite")]
    NonFinite(String),
}
