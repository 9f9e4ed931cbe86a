use std::fs;
use std::path::{Path, PathBuf};

use ruletag::autodiff::OptimizerConfig;
use ruletag::corpus::SplitFractions;
use ruletag::metrics::{AblationSpec, TailUnit, DEFAULT_TAIL_BUDGET};
use ruletag::models::{DistillationConfig, InferenceSource, TrainOptions, Variant, VariantConfig};
use ruletag::rules::{MatchMode, NegativeScope, RuleConfig};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

/// Everything a command needs besides its own flags. Loaded from JSON;
/// missing fields take the defaults below.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub corpus: Option<PathBuf>,
    pub dictionaries: Option<PathBuf>,
    pub embeddings: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
    pub output_dir: PathBuf,

    pub variant: Variant,
    pub dim: usize,
    pub hidden: usize,
    pub rule_hidden: usize,
    pub dropout: f64,
    pub trainable_embeddings: bool,

    pub lr: f64,
    pub clip_norm: Option<f64>,
    pub epochs: usize,
    pub select_best: bool,
    pub seed: u64,

    pub window: usize,
    pub match_mode: MatchMode,
    pub similarity_threshold: f64,
    pub case_fold: bool,
    pub negative_scope: NegativeScope,

    pub penalty: f64,
    pub imitation: f64,
    pub inference_source: InferenceSource,
    pub anneal: Option<f64>,

    pub split: SplitFractions,
    pub percent: u32,
    pub tail_budget: f64,
    pub tail_unit: TailUnit,

    pub ablation: AblationGridConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AblationGridConfig {
    pub variants: Vec<Variant>,
    pub percents: Vec<u32>,
    pub seeds: Vec<u64>,
}

impl Default for AblationGridConfig {
    fn default() -> Self {
        let spec = AblationSpec::default();
        AblationGridConfig {
            variants: spec.variants,
            percents: spec.percents,
            seeds: spec.seeds,
        }
    }
}

impl Default for RunConfig {
    fn default() -> Self {
        let model = VariantConfig::default();
        let train = TrainOptions::default();
        RunConfig {
            corpus: None,
            dictionaries: None,
            embeddings: None,
            checkpoint: None,
            output_dir: PathBuf::from("runs"),
            variant: model.variant,
            dim: model.dim,
            hidden: model.hidden,
            rule_hidden: model.rule_hidden,
            dropout: model.dropout,
            trainable_embeddings: model.trainable_embeddings,
            lr: model.optimizer.lr,
            clip_norm: model.optimizer.clip_norm,
            epochs: train.epochs,
            select_best: train.select_best,
            seed: train.seed,
            window: model.rules.window,
            match_mode: model.rules.match_mode,
            similarity_threshold: model.rules.similarity_threshold,
            case_fold: model.rules.case_fold,
            negative_scope: model.rules.negative_scope,
            penalty: model.distill.penalty,
            imitation: model.distill.imitation,
            inference_source: model.distill.inference_source,
            anneal: model.distill.anneal,
            split: SplitFractions::default(),
            percent: 100,
            tail_budget: DEFAULT_TAIL_BUDGET,
            tail_unit: TailUnit::Tokens,
            ablation: AblationGridConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::from_json(&text).map_err(|e| match e {
            CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn rule_config(&self) -> RuleConfig {
        RuleConfig {
            window: self.window,
            match_mode: self.match_mode,
            similarity_threshold: self.similarity_threshold,
            case_fold: self.case_fold,
            negative_scope: self.negative_scope,
        }
    }

    pub fn variant_config(&self) -> VariantConfig {
        VariantConfig {
            variant: self.variant,
            dim: self.dim,
            hidden: self.hidden,
            rule_hidden: self.rule_hidden,
            dropout: self.dropout,
            trainable_embeddings: self.trainable_embeddings,
            rules: self.rule_config(),
            distill: DistillationConfig {
                penalty: self.penalty,
                imitation: self.imitation,
                inference_source: self.inference_source,
                anneal: self.anneal,
            },
            optimizer: OptimizerConfig {
                lr: self.lr,
                clip_norm: self.clip_norm,
                ..OptimizerConfig::default()
            },
        }
    }

    pub fn train_options(&self) -> TrainOptions {
        TrainOptions {
            epochs: self.epochs,
            seed: self.seed,
            select_best: self.select_best,
        }
    }

    pub fn ablation_spec(&self) -> AblationSpec {
        AblationSpec {
            variants: self.ablation.variants.clone(),
            percents: self.ablation.percents.clone(),
            seeds: self.ablation.seeds.clone(),
            epochs: self.epochs,
            base: self.variant_config(),
            tail_budget: self.tail_budget,
            tail_unit: self.tail_unit,
        }
    }

    /// Checks value ranges and that every referenced input path exists.
    pub fn validate(&self) -> Result<()> {
        self.variant_config().validate()?;
        self.split.validate()?;
        if !(self.tail_budget > 0.0 && self.tail_budget <= 1.0) {
            return Err(CliError::Config(format!("tail budget {} outside (0, 1]", self.tail_budget)));
        }
        if !(self.similarity_threshold > 0.0 && self.similarity_threshold <= 1.0) {
            return Err(CliError::Config(format!(
                "similarity threshold {} outside (0, 1]",
                self.similarity_threshold
            )));
        }
        let inputs = [&self.corpus, &self.dictionaries, &self.embeddings, &self.checkpoint];
        for path in inputs.into_iter().flatten() {
            if !path.exists() {
                return Err(CliError::io(path, std::io::Error::from(std::io::ErrorKind::NotFound)));
            }
        }
        Ok(())
    }

    pub fn require_corpus(&self) -> Result<&Path> {
        self.corpus
            .as_deref()
            .ok_or_else(|| CliError::Config("no corpus path given".into()))
    }

    pub fn require_checkpoint(&self) -> Result<&Path> {
        self.checkpoint
            .as_deref()
            .ok_or_else(|| CliError::Config("no checkpoint path given".into()))
    }
}
