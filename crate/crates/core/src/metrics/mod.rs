//! Token-level micro/macro F1, tail-label scoring and the training-size ablation grid.

mod ablation;
mod eval;
mod tail;

use thiserror::Error;

use crate::corpus::TagId;

pub use ablation::{run_ablation, AblationCell, AblationGrid, AblationSpec, CellMedian};
pub use eval::{compare_runs, evaluate, evaluate_with_tail, Counts, EvalReport, LabelScore, RunComparison};
pub use tail::{
    label_counts, select_tail_from_counts, select_tail_labels, tail_micro_f1, TailUnit, DEFAULT_TAIL_BUDGET,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("gold has {gold} tokens but prediction has {pred}")]
    LengthMismatch { gold: usize, pred: usize },
    #[error("tag id {0} is outside the tag set")]
    UnknownTag(TagId),
    #[error("tail label set is empty")]
    EmptyTail,
    #[error("no gold or predicted token carries a tail label")]
    NoTailTokens,
    #[error("training data has no labelled tokens")]
    NoLabels,
    #[error("tail budget {0} outside (0, 1]")]
    BadBudget(f64),
    #[error("reports were computed over different tag sets")]
    TagSetMismatch,
    #[error("ablation grid needs at least one variant, percent and seed")]
    EmptyGrid,
}
