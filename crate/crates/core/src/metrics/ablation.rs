use std::collections::BTreeSet;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{select_tail_labels, EvalReport, MetricsError, TailUnit, DEFAULT_TAIL_BUDGET};
use crate::corpus::{subsample_indices, CorpusSplit, TagId, TagSet, TRAIN_PERCENTS};
use crate::embeddings::EmbeddingStore;
use crate::models::{evaluate_tagger, train, TrainOptions, Variant, VariantConfig};
use crate::rules::DictionarySet;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AblationSpec {
    pub variants: Vec<Variant>,
    pub percents: Vec<u32>,
    pub seeds: Vec<u64>,
    pub epochs: usize,
    /// Settings shared by every cell; the variant field is overridden.
    pub base: VariantConfig,
    pub tail_budget: f64,
    pub tail_unit: TailUnit,
}

impl Default for AblationSpec {
    fn default() -> Self {
        AblationSpec {
            variants: Variant::ALL.to_vec(),
            percents: TRAIN_PERCENTS.to_vec(),
            seeds: vec![1, 2, 3],
            epochs: 30,
            base: VariantConfig::default(),
            tail_budget: DEFAULT_TAIL_BUDGET,
            tail_unit: TailUnit::Tokens,
        }
    }
}

/// One trained and evaluated (variant, percent, seed) combination.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationCell {
    pub variant: Variant,
    pub percent: u32,
    pub seed: u64,
    /// Indices into the full training split.
    pub train_indices: Vec<usize>,
    pub selected_epoch: usize,
    pub report: EvalReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellMedian {
    pub variant: Variant,
    pub percent: u32,
    pub runs: usize,
    pub micro_f1: f64,
    pub macro_f1: f64,
    pub tail_micro_f1: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationGrid {
    pub tail_labels: BTreeSet<TagId>,
    pub cells: Vec<AblationCell>,
    pub medians: Vec<CellMedian>,
}

fn median(mut xs: Vec<f64>) -> Option<f64> {
    if xs.is_empty() {
        return None;
    }
    xs.sort_by(f64::total_cmp);
    let m = xs.len() / 2;
    Some(if xs.len() % 2 == 1 {
        xs[m]
    } else {
        (xs[m - 1] + xs[m]) / 2.0
    })
}

impl AblationGrid {
    pub fn to_jsonl(&self) -> String {
        self.cells
            .iter()
            .map(|c| serde_json::to_string(c).expect("cell serializes") + "\n")
            .collect()
    }

    pub fn median(&self, variant: Variant, percent: u32) -> Option<&CellMedian> {
        self.medians
            .iter()
            .find(|m| m.variant == variant && m.percent == percent)
    }

    /// One row per training percentage, micro/macro/tail columns per variant.
    pub fn summary_csv(&self) -> String {
        let variants: BTreeSet<Variant> = self.medians.iter().map(|m| m.variant).collect();
        let percents: BTreeSet<u32> = self.medians.iter().map(|m| m.percent).collect();
        let mut out = String::from("percent");
        for v in &variants {
            write!(out, ",{v}_micro_f1,{v}_macro_f1,{v}_tail_f1").unwrap();
        }
        out.push('\n');
        for p in &percents {
            write!(out, "{p}").unwrap();
            for &v in &variants {
                match self.median(v, *p) {
                    Some(m) => {
                        let tail = m.tail_micro_f1.map(|t| format!("{t:.4}")).unwrap_or_default();
                        write!(out, ",{:.4},{:.4},{tail}", m.micro_f1, m.macro_f1).unwrap();
                    }
                    None => out.push_str(",,,"),
                }
            }
            out.push('\n');
        }
        out
    }
}

/// Trains and evaluates every cell of the grid in parallel. Cells come back
/// ordered by variant, percent, then seed, independent of scheduling.
pub fn run_ablation(
    spec: &AblationSpec,
    split: &CorpusSplit,
    tags: &TagSet,
    dictionaries: &DictionarySet,
    store: &EmbeddingStore,
) -> crate::Result<AblationGrid> {
    if spec.variants.is_empty() || spec.percents.is_empty() || spec.seeds.is_empty() {
        return Err(MetricsError::EmptyGrid.into());
    }
    let tail = select_tail_labels(&split.train, tags, spec.tail_budget, spec.tail_unit)?;

    let mut jobs = Vec::new();
    for &variant in &spec.variants {
        for &percent in &spec.percents {
            for &seed in &spec.seeds {
                jobs.push((variant, percent, seed));
            }
        }
    }

    let cells: Vec<AblationCell> = jobs
        .par_iter()
        .map(|&(variant, percent, seed)| -> crate::Result<AblationCell> {
            let indices = subsample_indices(split.train.len(), percent, seed)?;
            let subset: Vec<_> = indices.iter().map(|&i| split.train[i].clone()).collect();
            let config = VariantConfig {
                variant,
                ..spec.base.clone()
            };
            let options = TrainOptions {
                epochs: spec.epochs,
                seed,
                select_best: true,
            };
            let mut store = store.clone();
            let (tagger, log) = train(config, &subset, &split.val, tags, dictionaries, &mut store, &options)?;
            let tail_ref = (!tail.is_empty()).then_some(&tail);
            let report = evaluate_tagger(&tagger, &split.test, Some(&store), tail_ref)?;
            Ok(AblationCell {
                variant,
                percent,
                seed,
                train_indices: indices,
                selected_epoch: log.selected_epoch,
                report,
            })
        })
        .collect::<crate::Result<_>>()?;

    let mut medians = Vec::new();
    for &variant in &spec.variants {
        for &percent in &spec.percents {
            let group: Vec<&AblationCell> = cells
                .iter()
                .filter(|c| c.variant == variant && c.percent == percent)
                .collect();
            let tails: Vec<f64> = group.iter().filter_map(|c| c.report.tail_micro_f1).collect();
            medians.push(CellMedian {
                variant,
                percent,
                runs: group.len(),
                micro_f1: median(group.iter().map(|c| c.report.micro_f1).collect()).unwrap_or(0.0),
                macro_f1: median(group.iter().map(|c| c.report.macro_f1).collect()).unwrap_or(0.0),
                tail_micro_f1: median(tails),
            });
        }
    }

    Ok(AblationGrid {
        tail_labels: tail,
        cells,
        medians,
    })
}
