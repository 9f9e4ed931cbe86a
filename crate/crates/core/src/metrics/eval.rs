use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{tail_micro_f1, MetricsError};
use crate::corpus::{TagId, TagSet};

/// True positive, false positive and false negative token counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Counts {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl Counts {
    pub fn precision(&self) -> f64 {
        ratio(self.tp, self.tp + self.fp)
    }

    pub fn recall(&self) -> f64 {
        ratio(self.tp, self.tp + self.fn_)
    }

    /// `2TP / (2TP + FP + FN)`; 1 when there is nothing to score, 0 when
    /// precision and recall are both 0.
    pub fn f1(&self) -> f64 {
        let denom = 2 * self.tp + self.fp + self.fn_;
        if denom == 0 {
            1.0
        } else {
            2.0 * self.tp as f64 / denom as f64
        }
    }
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LabelScore {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub micro_f1: f64,
    pub macro_f1: f64,
    pub micro_precision: f64,
    pub micro_recall: f64,
    pub counts: Counts,
    /// Every non-`other` label of the tag set.
    pub per_label: BTreeMap<TagId, LabelScore>,
    pub tail_labels: BTreeSet<TagId>,
    /// `None` when the tail set is empty or no token touches it.
    pub tail_micro_f1: Option<f64>,
    /// Tag names the ids refer to.
    pub tags: Vec<String>,
}

/// Token-level scoring with `other` excluded from every aggregate.
pub fn evaluate(gold: &[TagId], pred: &[TagId], tags: &TagSet) -> Result<EvalReport, MetricsError> {
    if gold.len() != pred.len() {
        return Err(MetricsError::LengthMismatch {
            gold: gold.len(),
            pred: pred.len(),
        });
    }
    let mut per: BTreeMap<TagId, Counts> = tags.labels().map(|l| (l, Counts::default())).collect();
    for (&g, &p) in gold.iter().zip(pred) {
        for id in [g, p] {
            if id >= tags.len() {
                return Err(MetricsError::UnknownTag(id));
            }
        }
        if g == p {
            if !tags.is_other(g) {
                per.get_mut(&g).unwrap().tp += 1;
            }
            continue;
        }
        if !tags.is_other(g) {
            per.get_mut(&g).unwrap().fn_ += 1;
        }
        if !tags.is_other(p) {
            per.get_mut(&p).unwrap().fp += 1;
        }
    }

    let mut total = Counts::default();
    for c in per.values() {
        total.tp += c.tp;
        total.fp += c.fp;
        total.fn_ += c.fn_;
    }
    let per_label: BTreeMap<TagId, LabelScore> = per
        .iter()
        .map(|(&l, c)| {
            (
                l,
                LabelScore {
                    precision: c.precision(),
                    recall: c.recall(),
                    f1: c.f1(),
                    support: c.tp + c.fn_,
                },
            )
        })
        .collect();

    let present: Vec<f64> = per_label
        .values()
        .filter(|s| s.support > 0)
        .map(|s| s.f1)
        .collect();
    let macro_f1 = if present.is_empty() {
        if total.fp == 0 {
            1.0
        } else {
            0.0
        }
    } else {
        present.iter().sum::<f64>() / present.len() as f64
    };

    Ok(EvalReport {
        micro_f1: total.f1(),
        macro_f1,
        micro_precision: total.precision(),
        micro_recall: total.recall(),
        counts: total,
        per_label,
        tail_labels: BTreeSet::new(),
        tail_micro_f1: None,
        tags: tags.names().to_vec(),
    })
}

/// [`evaluate`] plus the tail-label score for `tail`.
pub fn evaluate_with_tail(
    gold: &[TagId],
    pred: &[TagId],
    tags: &TagSet,
    tail: &BTreeSet<TagId>,
) -> Result<EvalReport, MetricsError> {
    let mut report = evaluate(gold, pred, tags)?;
    report.tail_labels = tail.clone();
    report.tail_micro_f1 = tail_micro_f1(gold, pred, tail).ok();
    Ok(report)
}

/// Labels whose candidate F1 is above, equal to, or below the baseline.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct RunComparison {
    pub improved: BTreeSet<TagId>,
    pub equal: BTreeSet<TagId>,
    pub worse: BTreeSet<TagId>,
}

pub fn compare_runs(baseline: &EvalReport, candidate: &EvalReport) -> Result<RunComparison, MetricsError> {
    if baseline.tags != candidate.tags {
        return Err(MetricsError::TagSetMismatch);
    }
    let mut out = RunComparison::default();
    for (label, base) in &baseline.per_label {
        let cand = candidate
            .per_label
            .get(label)
            .ok_or(MetricsError::TagSetMismatch)?;
        let bucket = match cand.f1.partial_cmp(&base.f1) {
            Some(std::cmp::Ordering::Greater) => &mut out.improved,
            Some(std::cmp::Ordering::Less) => &mut out.worse,
            _ => &mut out.equal,
        };
        bucket.insert(*label);
    }
    Ok(out)
}
