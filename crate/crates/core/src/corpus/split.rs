use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{doc_ids, CorpusError, Sentence};

/// Training-set sizes used by the ablation grid.
pub const TRAIN_PERCENTS: [u32; 5] = [20, 40, 60, 80, 100];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitFractions {
    pub train: f64,
    pub val: f64,
    pub test: f64,
}

impl Default for SplitFractions {
    fn default() -> Self {
        SplitFractions {
            train: 0.7,
            val: 0.1,
            test: 0.2,
        }
    }
}

impl SplitFractions {
    pub fn validate(&self) -> Result<(), CorpusError> {
        let parts = [self.train, self.val, self.test];
        if parts.iter().any(|f| !f.is_finite() || *f < 0.0) {
            return Err(CorpusError::InvalidFractions(format!(
                "fractions must be finite and non-negative: {parts:?}"
            )));
        }
        let sum: f64 = parts.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(CorpusError::InvalidFractions(format!(
                "fractions sum to {sum}, expected 1"
            )));
        }
        if self.train == 0.0 {
            return Err(CorpusError::InvalidFractions("train fraction is zero".into()));
        }
        Ok(())
    }
}

impl From<(f64, f64, f64)> for SplitFractions {
    fn from((train, val, test): (f64, f64, f64)) -> Self {
        SplitFractions { train, val, test }
    }
}

/// Document-level train/val/test partition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusSplit {
    pub train: Vec<Sentence>,
    pub val: Vec<Sentence>,
    pub test: Vec<Sentence>,
    pub fractions: SplitFractions,
    pub seed: u64,
}

impl CorpusSplit {
    pub fn train_docs(&self) -> Vec<u64> {
        doc_ids(&self.train)
    }

    pub fn val_docs(&self) -> Vec<u64> {
        doc_ids(&self.val)
    }

    pub fn test_docs(&self) -> Vec<u64> {
        doc_ids(&self.test)
    }
}

/// Shuffles documents with a seeded RNG and partitions them by document
/// count. Sentences keep their original order within each part.
pub fn split_corpus(
    sentences: &[Sentence],
    fractions: impl Into<SplitFractions>,
    seed: u64,
) -> Result<CorpusSplit, CorpusError> {
    let fractions = fractions.into();
    fractions.validate()?;

    let mut docs = doc_ids(sentences);
    if docs.len() < 3 {
        return Err(CorpusError::TooFewDocuments(docs.len()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    docs.shuffle(&mut rng);

    let counts = partition_counts(docs.len(), &fractions);
    let train_docs: HashSet<u64> = docs[..counts[0]].iter().copied().collect();
    let val_docs: HashSet<u64> = docs[counts[0]..counts[0] + counts[1]].iter().copied().collect();

    let mut split = CorpusSplit {
        train: Vec::new(),
        val: Vec::new(),
        test: Vec::new(),
        fractions,
        seed,
    };
    for s in sentences {
        let part = if train_docs.contains(&s.doc_id) {
            &mut split.train
        } else if val_docs.contains(&s.doc_id) {
            &mut split.val
        } else {
            &mut split.test
        };
        part.push(s.clone());
    }
    Ok(split)
}

/// Rounded document counts per part; any part with a positive fraction gets
/// at least one document, taken from the largest part.
fn partition_counts(n: usize, fractions: &SplitFractions) -> [usize; 3] {
    let train = (fractions.train * n as f64).round() as usize;
    let val = ((fractions.val * n as f64).round() as usize).min(n - train.min(n));
    let mut counts = [train.min(n), val, 0];
    counts[2] = n - counts[0] - counts[1];

    let wanted = [fractions.train, fractions.val, fractions.test];
    for part in 0..3 {
        if wanted[part] > 0.0 && counts[part] == 0 {
            let donor = (0..3).max_by_key(|&i| (counts[i], usize::MAX - i)).unwrap();
            if counts[donor] > 1 {
                counts[donor] -= 1;
                counts[part] += 1;
            }
        }
    }
    counts
}

/// Indices (ascending) of the training sentences kept at `percent`.
///
/// The first ⌈percent·n/100⌉ entries of one seeded permutation are kept, so
/// smaller percentages are always subsets of larger ones for a given seed.
pub fn subsample_indices(n: usize, percent: u32, seed: u64) -> Result<Vec<usize>, CorpusError> {
    if !TRAIN_PERCENTS.contains(&percent) {
        return Err(CorpusError::InvalidPercent(percent));
    }
    let keep = (percent as usize * n).div_ceil(100);
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);
    let mut kept = order[..keep].to_vec();
    kept.sort_unstable();
    Ok(kept)
}

/// Keeps a seeded, nested fraction of the training sentences; val and test
/// are untouched.
pub fn subsample_train(
    split: &CorpusSplit,
    percent: u32,
    seed: u64,
) -> Result<CorpusSplit, CorpusError> {
    let kept = subsample_indices(split.train.len(), percent, seed)?;
    Ok(CorpusSplit {
        train: kept.iter().map(|&i| split.train[i].clone()).collect(),
        ..split.clone()
    })
}
