//! Pre-trained word vectors in the textual `vocab_size dim` / `token v1 .. vd` layout.

use std::borrow::Cow;
use std::collections::{HashMap, HashSet};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EmbeddingError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("embedding dimension must be positive")]
    ZeroDim,
    #[error("coverage of an empty vocabulary is undefined")]
    EmptyVocab,
}

/// How vectors for words missing from the file are produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum OovPolicy {
    /// Gaussian entries with standard deviation `1/sqrt(dim)`.
    #[default]
    RandomNormal,
    Zeros,
}

/// Settings needed to reproduce OOV vectors without the original file.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingSettings {
    pub dim: usize,
    pub trainable: bool,
    pub oov_policy: OovPolicy,
    pub oov_seed: u64,
}

#[derive(Debug, Clone)]
pub struct EmbeddingStore {
    dim: usize,
    table: HashMap<String, Vec<f64>>,
    oov_cache: HashMap<String, Vec<f64>>,
    pub trainable: bool,
    pub oov_policy: OovPolicy,
    pub oov_seed: u64,
}

impl EmbeddingStore {
    /// A store with no pre-trained entries; every lookup goes through the
    /// OOV policy.
    pub fn empty(dim: usize) -> Result<Self, EmbeddingError> {
        if dim == 0 {
            return Err(EmbeddingError::ZeroDim);
        }
        Ok(EmbeddingStore {
            dim,
            table: HashMap::new(),
            oov_cache: HashMap::new(),
            trainable: true,
            oov_policy: OovPolicy::default(),
            oov_seed: 0,
        })
    }

    pub fn from_settings(settings: EmbeddingSettings) -> Result<Self, EmbeddingError> {
        let mut store = Self::empty(settings.dim)?;
        store.trainable = settings.trainable;
        store.oov_policy = settings.oov_policy;
        store.oov_seed = settings.oov_seed;
        Ok(store)
    }

    pub fn settings(&self) -> EmbeddingSettings {
        EmbeddingSettings {
            dim: self.dim,
            trainable: self.trainable,
            oov_policy: self.oov_policy,
            oov_seed: self.oov_seed,
        }
    }

    pub fn with_oov_policy(mut self, policy: OovPolicy) -> Self {
        self.oov_policy = policy;
        self.oov_cache.clear();
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.oov_seed = seed;
        self.oov_cache.clear();
        self
    }

    pub fn with_trainable(mut self, trainable: bool) -> Self {
        self.trainable = trainable;
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of pre-trained entries (cached OOV vectors excluded).
    pub fn len(&self) -> usize {
        self.table.len()
    }

    pub fn is_empty(&self) -> bool {
        self.table.is_empty()
    }

    pub fn contains(&self, word: &str) -> bool {
        self.table.contains_key(word)
    }

    /// Adds a pre-trained entry unless the word is already present.
    pub fn insert(&mut self, word: &str, vector: Vec<f64>) -> Result<bool, EmbeddingError> {
        if vector.len() != self.dim {
            return Err(EmbeddingError::Parse {
                line: 0,
                message: format!("vector for `{word}` has {} components, expected {}", vector.len(), self.dim),
            });
        }
        if self.table.contains_key(word) {
            return Ok(false);
        }
        self.oov_cache.remove(word);
        self.table.insert(word.to_string(), vector);
        Ok(true)
    }

    /// Returns the stored vector, or materializes and caches the OOV vector.
    pub fn lookup(&mut self, word: &str) -> &[f64] {
        if self.table.contains_key(word) {
            return &self.table[word];
        }
        if !self.oov_cache.contains_key(word) {
            let v = self.oov_vector(word);
            self.oov_cache.insert(word.to_string(), v);
        }
        &self.oov_cache[word]
    }

    /// Read-only variant of [`lookup`](Self::lookup): uses the cache when
    /// present and otherwise computes the (deterministic) OOV vector.
    pub fn vector(&self, word: &str) -> Cow<'_, [f64]> {
        match self.table.get(word).or_else(|| self.oov_cache.get(word)) {
            Some(v) => Cow::Borrowed(v),
            None => Cow::Owned(self.oov_vector(word)),
        }
    }

    /// Pre-materializes OOV vectors for `words` so that later reads need no mutation.
    pub fn materialize<'a>(&mut self, words: impl IntoIterator<Item = &'a str>) {
        for w in words {
            self.lookup(w);
        }
    }

    fn oov_vector(&self, word: &str) -> Vec<f64> {
        match self.oov_policy {
            OovPolicy::Zeros => vec![0.0; self.dim],
            OovPolicy::RandomNormal => {
                let mut rng = ChaCha8Rng::seed_from_u64(self.oov_seed ^ fnv1a(word.as_bytes()));
                let normal = Normal::new(0.0, 1.0 / (self.dim as f64).sqrt()).unwrap();
                (0..self.dim).map(|_| normal.sample(&mut rng)).collect()
            }
        }
    }
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Parses a word-vector text file. Duplicate tokens keep their first vector;
/// reading stops after `vocab_size` entries.
pub fn load_vectors(text: &str) -> Result<EmbeddingStore, EmbeddingError> {
    let mut lines = text.lines().enumerate();
    let (vocab_size, dim) = loop {
        let Some((idx, line)) = lines.next() else {
            return Err(EmbeddingError::Parse {
                line: 1,
                message: "missing `vocab_size dim` header".into(),
            });
        };
        if line.trim().is_empty() {
            continue;
        }
        let header: Vec<&str> = line.split_whitespace().collect();
        let parsed = match header.as_slice() {
            [v, d] => v.parse::<usize>().ok().zip(d.parse::<usize>().ok()),
            _ => None,
        };
        match parsed {
            Some(pair) => break pair,
            None => {
                return Err(EmbeddingError::Parse {
                    line: idx + 1,
                    message: format!("bad header `{}`", line.trim()),
                })
            }
        }
    };

    let mut store = EmbeddingStore::empty(dim)?;
    let mut read = 0;
    for (idx, line) in lines {
        if read == vocab_size {
            break;
        }
        let mut parts = line.split_whitespace();
        let Some(word) = parts.next() else { continue };
        let values: Vec<&str> = parts.collect();
        if values.len() != dim {
            return Err(EmbeddingError::Parse {
                line: idx + 1,
                message: format!("expected {dim} components, found {}", values.len()),
            });
        }
        let vector = values
            .iter()
            .map(|v| {
                v.parse::<f64>().map_err(|_| EmbeddingError::Parse {
                    line: idx + 1,
                    message: format!("component `{v}` is not a number"),
                })
            })
            .collect::<Result<Vec<f64>, _>>()?;
        store.insert(word, vector)?;
        read += 1;
    }
    Ok(store)
}

/// Fraction of `vocab` that has a pre-trained vector.
pub fn coverage<S: AsRef<str> + Eq + std::hash::Hash>(
    store: &EmbeddingStore,
    vocab: &HashSet<S>,
) -> Result<f64, EmbeddingError> {
    if vocab.is_empty() {
        return Err(EmbeddingError::EmptyVocab);
    }
    let hits = vocab.iter().filter(|w| store.contains(w.as_ref())).count();
    Ok(hits as f64 / vocab.len() as f64)
}

/// Cosine similarity; 0 when either vector has zero norm.
pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_file() {
        let store = load_vectors("2 3\nflood 0.1 0.2 0.3\nrain 1 2 3\n").unwrap();
        assert_eq!(store.len(), 2);
        assert_eq!(store.dim(), 3);
        assert_eq!(&*store.vector("flood"), &[0.1, 0.2, 0.3]);
    }

    #[test]
    fn short_line_is_an_error() {
        let err = load_vectors("2 3\nflood 0.1 0.2 0.3\nrain 1 2\n").unwrap_err();
        assert!(matches!(err, EmbeddingError::Parse { line: 3, .. }), "{err}");
        let err = load_vectors("1 2\nflood 0.1 abc\n").unwrap_err();
        assert!(matches!(err, EmbeddingError::Parse { line: 2, .. }), "{err}");
    }

    #[test]
    fn duplicates_and_header_cap() {
        let store = load_vectors("3 1\na 1\na 2\nb 3\nc 4\n").unwrap();
        assert_eq!(store.len(), 2);
        assert_eq!(&*store.vector("a"), &[1.0]);
        assert!(!store.contains("c"));
    }

    #[test]
    fn trailing_space_lines() {
        let store = load_vectors("1 2 \nword 0.5 -0.5 \n").unwrap();
        assert_eq!(&*store.vector("word"), &[0.5, -0.5]);
    }

    #[test]
    fn half_coverage() {
        let mut text = String::from("1000 2\n");
        for i in 0..1000 {
            text.push_str(&format!("e{i} 0.1 0.2\n"));
        }
        let store = load_vectors(&text).unwrap();
        let vocab: HashSet<String> = (0..300)
            .map(|i| format!("e{i}"))
            .chain((0..300).map(|i| format!("missing{i}")))
            .collect();
        assert_eq!(vocab.len(), 600);
        assert_eq!(coverage(&store, &vocab).unwrap(), 0.5);
    }

    #[test]
    fn coverage_edge_cases() {
        let store = load_vectors("3 1\na 1\nb 1\nc 1\n").unwrap();
        let all: HashSet<&str> = ["a", "b"].into_iter().collect();
        assert_eq!(coverage(&store, &all).unwrap(), 1.0);
        let none: HashSet<&str> = ["x", "y"].into_iter().collect();
        assert_eq!(coverage(&store, &none).unwrap(), 0.0);
        let half: HashSet<&str> = ["a", "b", "c", "x", "y", "z"].into_iter().collect();
        assert_eq!(coverage(&store, &half).unwrap(), 0.5);
        assert_eq!(
            coverage(&store, &HashSet::<&str>::new()).unwrap_err(),
            EmbeddingError::EmptyVocab
        );
    }

    #[test]
    fn oov_is_cached_and_stable() {
        let mut store = EmbeddingStore::empty(8).unwrap().with_seed(3);
        let first = store.lookup("unseen").to_vec();
        let second = store.lookup("unseen").to_vec();
        assert_eq!(first, second);
        assert_eq!(first.len(), 8);
        assert!(first.iter().any(|x| *x != 0.0));
        assert_eq!(&*store.vector("unseen"), first.as_slice());
        // a fresh store with the same seed reproduces it regardless of lookup order
        let mut other = EmbeddingStore::empty(8).unwrap().with_seed(3);
        other.lookup("something-else");
        assert_eq!(other.lookup("unseen"), first.as_slice());
    }

    #[test]
    fn zero_policy() {
        let mut store = EmbeddingStore::empty(4).unwrap().with_oov_policy(OovPolicy::Zeros);
        assert_eq!(store.lookup("x"), &[0.0; 4]);
    }

    #[test]
    fn known_word_is_exact() {
        let mut store = load_vectors("1 2\nx 0.25 -1e-3\n").unwrap();
        assert_eq!(store.lookup("x"), &[0.25, -1e-3]);
    }

    #[test]
    fn cosine_basics() {
        assert!((cosine(&[1.0, 0.0], &[2.0, 0.0]) - 1.0).abs() < 1e-15);
        assert_eq!(cosine(&[1.0, 0.0], &[0.0, 3.0]), 0.0);
        assert_eq!(cosine(&[0.0, 0.0], &[1.0, 1.0]), 0.0);
    }
}
