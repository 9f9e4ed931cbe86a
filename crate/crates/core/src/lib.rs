//! Rule-augmented sequence tagging for event extraction.
//!
//! Four tagger variants share one BiLSTM backbone:
//!
//! * `A`: word embeddings only.
//! * `B`: embeddings concatenated with the per-token rule vector.
//! * `C`: a second BiLSTM over rule vectors, hidden states concatenated.
//! * `D`: rules enter through a teacher distribution that the student imitates,
//!   and prediction uses the teacher.
//!
//! Rule vectors come from synonym and negative dictionaries matched in a
//! window around each token ([`rules`]). Evaluation uses token-level micro
//! and macro F1 plus tail-label scores ([`metrics`]).

pub mod autodiff;
pub mod corpus;
pub mod embeddings;
pub mod metrics;
pub mod models;
pub mod rules;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Corpus(#[from] corpus::CorpusError),
    #[error(transparent)]
    Embedding(#[from] embeddings::EmbeddingError),
    #[error(transparent)]
    Rule(#[from] rules::RuleError),
    #[error(transparent)]
    Autodiff(#[from] autodiff::AutodiffError),
    #[error(transparent)]
    Model(#[from] models::ModelError),
    #[error(transparent)]
    Metrics(#[from] metrics::MetricsError),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
