use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::ModelError;
use crate::autodiff::OptimizerConfig;
use crate::rules::RuleConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Variant {
    /// BiLSTM over word embeddings.
    A,
    /// Rule vector concatenated to each embedding.
    B,
    /// Separate BiLSTM over rule vectors.
    C,
    /// Rule projection through a teacher distribution.
    D,
}

impl Variant {
    pub const ALL: [Variant; 4] = [Variant::A, Variant::B, Variant::C, Variant::D];

    pub fn uses_rules(self) -> bool {
        self != Variant::A
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Variant::A => "A",
            Variant::B => "B",
            Variant::C => "C",
            Variant::D => "D",
        };
        f.write_str(s)
    }
}

impl FromStr for Variant {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "A" | "a" => Ok(Variant::A),
            "B" | "b" => Ok(Variant::B),
            "C" | "c" => Ok(Variant::C),
            "D" | "d" => Ok(Variant::D),
            other => Err(ModelError::Config(format!("unknown variant `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum InferenceSource {
    #[default]
    Teacher,
    Student,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DistillationConfig {
    /// Damping constant `C`: rule-disallowed labels are scaled by `exp(-C)`.
    pub penalty: f64,
    /// Imitation weight `π` on the KL term.
    pub imitation: f64,
    pub inference_source: InferenceSource,
    /// When set to `α`, the imitation weight at epoch `t` (from 1) becomes
    /// `min(π, 1 - α^t)`. Off by default.
    pub anneal: Option<f64>,
}

impl Default for DistillationConfig {
    fn default() -> Self {
        DistillationConfig {
            penalty: 1.0,
            imitation: 0.4,
            inference_source: InferenceSource::Teacher,
            anneal: None,
        }
    }
}

impl DistillationConfig {
    pub fn imitation_at(&self, epoch: usize) -> f64 {
        match self.anneal {
            None => self.imitation,
            Some(alpha) => self.imitation.min(1.0 - alpha.powi(epoch as i32)),
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if !(self.penalty >= 0.0 && self.penalty.is_finite()) {
            return Err(ModelError::Config(format!("penalty {} must be finite and >= 0", self.penalty)));
        }
        if !(0.0..=1.0).contains(&self.imitation) {
            return Err(ModelError::Config(format!("imitation {} outside [0, 1]", self.imitation)));
        }
        if let Some(a) = self.anneal {
            if !(0.0..1.0).contains(&a) {
                return Err(ModelError::Config(format!("anneal base {a} outside [0, 1)")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VariantConfig {
    pub variant: Variant,
    /// Word-embedding dimension.
    pub dim: usize,
    /// Hidden size per direction of the word encoder.
    pub hidden: usize,
    /// Hidden size per direction of the rule encoder (variant C).
    pub rule_hidden: usize,
    pub dropout: f64,
    pub trainable_embeddings: bool,
    pub rules: RuleConfig,
    pub distill: DistillationConfig,
    pub optimizer: OptimizerConfig,
}

impl Default for VariantConfig {
    fn default() -> Self {
        VariantConfig {
            variant: Variant::A,
            dim: 100,
            hidden: 100,
            rule_hidden: 100,
            dropout: 0.5,
            trainable_embeddings: true,
            rules: RuleConfig::default(),
            distill: DistillationConfig::default(),
            optimizer: OptimizerConfig::default(),
        }
    }
}

impl VariantConfig {
    pub fn new(variant: Variant) -> Self {
        VariantConfig {
            variant,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.dim == 0 {
            return Err(ModelError::Config("embedding dimension must be positive".into()));
        }
        if self.hidden == 0 {
            return Err(ModelError::Config("hidden size must be positive".into()));
        }
        if self.variant == Variant::C && self.rule_hidden == 0 {
            return Err(ModelError::Config("rule encoder hidden size must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(ModelError::Config(format!("dropout {} outside [0, 1)", self.dropout)));
        }
        if !(self.optimizer.lr > 0.0 && self.optimizer.lr.is_finite()) {
            return Err(ModelError::Config(format!("learning rate {} must be positive", self.optimizer.lr)));
        }
        self.distill.validate()
    }
}
