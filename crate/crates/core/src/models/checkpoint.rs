use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ModelError, Tagger, VariantConfig};
use crate::autodiff::{ModelParameters, Tensor};
use crate::corpus::TagSet;
use crate::embeddings::EmbeddingSettings;
use crate::rules::{compile_dictionaries, DictionaryFile};

pub const CHECKPOINT_FORMAT: &str = "ruletag-checkpoint-v1";

/// Everything needed to rebuild a [`Tagger`] bit for bit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub config: VariantConfig,
    pub tags: TagSet,
    pub vocab: Vec<String>,
    pub params: ModelParameters,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frozen_embedding: Option<Tensor>,
    pub embedding: EmbeddingSettings,
    pub dictionaries: DictionaryFile,
}

impl Checkpoint {
    pub fn from_tagger(tagger: &Tagger) -> Self {
        Checkpoint {
            format: CHECKPOINT_FORMAT.to_string(),
            config: tagger.config().clone(),
            tags: tagger.tags().clone(),
            vocab: tagger.vocab().to_vec(),
            params: tagger.params().clone(),
            frozen_embedding: tagger.frozen_embedding().cloned(),
            embedding: tagger.embedding_settings(),
            dictionaries: tagger.dictionaries().to_file(tagger.tags()),
        }
    }

    pub fn into_tagger(self) -> Result<Tagger, ModelError> {
        if self.format != CHECKPOINT_FORMAT {
            return Err(ModelError::Checkpoint(format!("unsupported format `{}`", self.format)));
        }
        let dictionaries = compile_dictionaries(&self.dictionaries, &self.tags, self.config.rules.case_fold)?;
        Tagger::from_parts(
            self.config,
            self.tags,
            self.vocab,
            self.params,
            self.frozen_embedding,
            self.embedding,
            dictionaries,
        )
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("checkpoint serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, ModelError> {
        serde_json::from_str(text).map_err(|e| ModelError::Checkpoint(e.to_string()))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), ModelError> {
        fs::write(path.as_ref(), self.to_json()).map_err(|source| ModelError::Io {
            path: path.as_ref().display().to_string(),
            source,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ModelError> {
        let text = fs::read_to_string(path.as_ref()).map_err(|source| ModelError::Io {
            path: path.as_ref().display().to_string(),
            source,
        })?;
        Self::from_json(&text)
    }
}
