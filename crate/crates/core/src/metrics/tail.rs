use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::{Counts, MetricsError};
use crate::corpus::{Sentence, TagId, TagSet};

/// Default share of labelled training instances allotted to tail labels.
pub const DEFAULT_TAIL_BUDGET: f64 = 0.05;

/// What counts as one training instance when measuring label frequency.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum TailUnit {
    #[default]
    Tokens,
    /// Number of sentences containing the label at least once.
    Sentences,
}

/// Per-label instance counts over the non-`other` labels that occur.
pub fn label_counts(train: &[Sentence], tags: &TagSet, unit: TailUnit) -> Vec<(TagId, usize)> {
    let mut counts = vec![0usize; tags.len()];
    for s in train {
        match unit {
            TailUnit::Tokens => {
                for t in &s.tokens {
                    counts[t.tag] += 1;
                }
            }
            TailUnit::Sentences => {
                let seen: BTreeSet<TagId> = s.tokens.iter().map(|t| t.tag).collect();
                for t in seen {
                    counts[t] += 1;
                }
            }
        }
    }
    tags.labels()
        .filter(|&l| counts[l] > 0)
        .map(|l| (l, counts[l]))
        .collect()
}

/// Longest prefix of labels sorted by ascending count (ties by id) whose
/// cumulative count stays within `budget` of the total.
pub fn select_tail_from_counts(counts: &[(TagId, usize)], budget: f64) -> Result<BTreeSet<TagId>, MetricsError> {
    if !(budget > 0.0 && budget <= 1.0) {
        return Err(MetricsError::BadBudget(budget));
    }
    let total: usize = counts.iter().map(|(_, c)| c).sum();
    if total == 0 {
        return Err(MetricsError::NoLabels);
    }
    let threshold = budget * total as f64;
    let mut sorted = counts.to_vec();
    sorted.sort_by_key(|&(id, c)| (c, id));
    let mut tail = BTreeSet::new();
    let mut mass = 0usize;
    for (id, c) in sorted {
        if (mass + c) as f64 > threshold {
            break;
        }
        mass += c;
        tail.insert(id);
    }
    Ok(tail)
}

pub fn select_tail_labels(
    train: &[Sentence],
    tags: &TagSet,
    budget: f64,
    unit: TailUnit,
) -> Result<BTreeSet<TagId>, MetricsError> {
    select_tail_from_counts(&label_counts(train, tags, unit), budget)
}

/// Micro-F1 over the tokens whose gold or predicted tag is a tail label.
pub fn tail_micro_f1(gold: &[TagId], pred: &[TagId], tail: &BTreeSet<TagId>) -> Result<f64, MetricsError> {
    if gold.len() != pred.len() {
        return Err(MetricsError::LengthMismatch {
            gold: gold.len(),
            pred: pred.len(),
        });
    }
    if tail.is_empty() {
        return Err(MetricsError::EmptyTail);
    }
    let mut c = Counts::default();
    let mut touched = false;
    for (g, p) in gold.iter().zip(pred) {
        let (gt, pt) = (tail.contains(g), tail.contains(p));
        touched |= gt || pt;
        if g == p {
            if gt {
                c.tp += 1;
            }
            continue;
        }
        if gt {
            c.fn_ += 1;
        }
        if pt {
            c.fp += 1;
        }
    }
    if !touched {
        return Err(MetricsError::NoTailTokens);
    }
    Ok(c.f1())
}
