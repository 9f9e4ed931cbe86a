//! Token/tag corpora in the three-column `token doc_id TAG` layout.
//!
//! Sentences are separated by blank lines. Every corpus carries a [`TagSet`]
//! whose index 0 is always the reserved `other` tag, written `O` on disk.

mod format;
mod split;
mod synthetic;

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use format::{iob_to_to, parse_corpus, parse_corpus_with_tags, write_corpus};
pub use split::{split_corpus, subsample_indices, subsample_train, CorpusSplit, SplitFractions, TRAIN_PERCENTS};
pub use synthetic::{generate_synthetic, SyntheticConfig, SyntheticCorpus};

/// Surface form of the reserved `other` tag.
pub const OTHER_TAG: &str = "O";

pub type TagId = usize;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CorpusError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("corpus is empty")]
    Empty,
    #[error("invalid split fractions: {0}")]
    InvalidFractions(String),
    #[error("need at least 3 documents to split, found {0}")]
    TooFewDocuments(usize),
    #[error("training percent {0} is not one of 20, 40, 60, 80, 100")]
    InvalidPercent(u32),
    #[error("tag `{0}` does not follow the B-/I-/O convention")]
    InvalidIobTag(String),
    #[error("invalid synthetic config: {0}")]
    InvalidSynthetic(String),
    #[error("invalid tag set: {0}")]
    InvalidTagSet(String),
}

/// Closed label inventory. `other` sits at index 0.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<String>", into = "Vec<String>")]
pub struct TagSet {
    names: Vec<String>,
    #[serde(skip)]
    index: HashMap<String, TagId>,
}

impl TagSet {
    /// A tag set holding only `other`.
    pub fn new() -> Self {
        let mut tags = TagSet {
            names: Vec::new(),
            index: HashMap::new(),
        };
        tags.push(OTHER_TAG.to_string());
        tags
    }

    /// Builds a tag set from an ordered name list; `O` must be first.
    pub fn from_names(names: Vec<String>) -> Result<Self, CorpusError> {
        if names.first().map(String::as_str) != Some(OTHER_TAG) {
            return Err(CorpusError::InvalidTagSet(format!(
                "first tag must be `{OTHER_TAG}`"
            )));
        }
        let mut tags = TagSet::new();
        for name in names.into_iter().skip(1) {
            if name.is_empty() || name.chars().any(char::is_whitespace) {
                return Err(CorpusError::InvalidTagSet(format!("bad tag name `{name}`")));
            }
            if tags.id(&name).is_some() {
                return Err(CorpusError::InvalidTagSet(format!("duplicate tag `{name}`")));
            }
            tags.push(name);
        }
        Ok(tags)
    }

    fn push(&mut self, name: String) -> TagId {
        let id = self.names.len();
        self.index.insert(name.clone(), id);
        self.names.push(name);
        id
    }

    /// Returns the id of `name`, adding it if unseen.
    pub fn intern(&mut self, name: &str) -> TagId {
        match self.index.get(name) {
            Some(&id) => id,
            None => self.push(name.to_string()),
        }
    }

    pub fn id(&self, name: &str) -> Option<TagId> {
        self.index.get(name).copied()
    }

    pub fn name(&self, id: TagId) -> &str {
        &self.names[id]
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn other(&self) -> TagId {
        0
    }

    pub fn is_other(&self, id: TagId) -> bool {
        id == self.other()
    }

    /// Number of tags including `other`.
    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    /// Ids of every non-`other` label, ascending.
    pub fn labels(&self) -> impl Iterator<Item = TagId> + '_ {
        (0..self.len()).filter(move |&id| !self.is_other(id))
    }
}

impl Default for TagSet {
    fn default() -> Self {
        TagSet::new()
    }
}

impl TryFrom<Vec<String>> for TagSet {
    type Error = CorpusError;

    fn try_from(names: Vec<String>) -> Result<Self, Self::Error> {
        TagSet::from_names(names)
    }
}

impl From<TagSet> for Vec<String> {
    fn from(tags: TagSet) -> Self {
        tags.names
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Token {
    pub surface: String,
    pub tag: TagId,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sentence {
    pub doc_id: u64,
    pub tokens: Vec<Token>,
}

impl Sentence {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn words(&self) -> Vec<&str> {
        self.tokens.iter().map(|t| t.surface.as_str()).collect()
    }

    pub fn gold(&self) -> Vec<TagId> {
        self.tokens.iter().map(|t| t.tag).collect()
    }
}

/// Sorted, deduplicated document ids of `sentences`.
pub fn doc_ids(sentences: &[Sentence]) -> Vec<u64> {
    let mut ids: Vec<u64> = sentences.iter().map(|s| s.doc_id).collect();
    ids.sort_unstable();
    ids.dedup();
    ids
}
