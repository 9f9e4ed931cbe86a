//! The four tagger variants, rule-guided distillation, training and checkpoints.

mod checkpoint;
mod config;
mod distill;
mod tagger;
mod train;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::autodiff::AutodiffError;
use crate::corpus::TagId;
use crate::embeddings::EmbeddingError;
use crate::metrics::MetricsError;
use crate::rules::RuleError;

pub use checkpoint::{Checkpoint, CHECKPOINT_FORMAT};
pub use config::{DistillationConfig, InferenceSource, Variant, VariantConfig};
pub use distill::{distill_loss, distill_loss_on_tape, project_sentence, project_teacher};
pub use tagger::{forward_a, forward_b, forward_c, predict_d, Tagger, EMBEDDING, OUT_BIAS, OUT_WEIGHT};
pub use train::{evaluate_tagger, predict_sentences, train, EpochLog, TrainOptions, TrainingLog};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("cannot run on an empty sentence")]
    EmptySentence,
    #[error("this variant needs rule vectors")]
    MissingRules,
    #[error("expected {expected} rule entries, got {got}")]
    RuleLength { expected: usize, got: usize },
    #[error("rule vector has no bit set")]
    InvalidRuleVector,
    #[error("distribution has {probs} entries but rule vector has {rules}")]
    LengthMismatch { probs: usize, rules: usize },
    #[error("training split has no sentences")]
    EmptyTrain,
    #[error("non-finite value in parameter `{name}` after epoch {epoch}")]
    NonFinite { epoch: usize, name: String },
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Autodiff(#[from] AutodiffError),
    #[error(transparent)]
    Rule(#[from] RuleError),
    #[error(transparent)]
    Embedding(#[from] EmbeddingError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

/// A probability distribution over the tag set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TagDistribution(Vec<f64>);

impl TagDistribution {
    /// Accepts any non-negative vector summing to 1 within `1e-9`.
    pub fn new(probs: Vec<f64>) -> Result<Self, ModelError> {
        let sum: f64 = probs.iter().sum();
        if probs.is_empty() || probs.iter().any(|p| !(p.is_finite() && *p >= 0.0)) || (sum - 1.0).abs() > 1e-9 {
            return Err(ModelError::Config(format!("not a probability vector: {probs:?}")));
        }
        Ok(TagDistribution(probs))
    }

    pub(crate) fn new_unchecked(probs: Vec<f64>) -> Self {
        TagDistribution(probs)
    }

    pub fn probs(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Index of the largest entry; the lowest index wins ties.
    pub fn argmax(&self) -> TagId {
        let mut best = 0;
        for (i, &p) in self.0.iter().enumerate() {
            if p > self.0[best] {
                best = i;
            }
        }
        best
    }
}

/// The rule-projected distribution used as the distillation target.
pub type TeacherDistribution = TagDistribution;
