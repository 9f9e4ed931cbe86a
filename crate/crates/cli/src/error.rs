use std::io;
use std::path::{Path, PathBuf};

use ruletag::autodiff::AutodiffError;
use ruletag::corpus::CorpusError;
use ruletag::embeddings::EmbeddingError;
use ruletag::metrics::MetricsError;
use ruletag::models::ModelError;
use ruletag::rules::RuleError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("numeric error: {0}")]
    Numeric(String),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
}

impl CliError {
    /// Process exit status: 1 config, 2 data, 3 numeric, 4 I/O.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 1,
            CliError::Data(_) => 2,
            CliError::Numeric(_) => 3,
            CliError::Io { .. } => 4,
        }
    }

    pub(crate) fn io(path: &Path, source: io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    /// Prefixes data errors with the file they came from. Parse errors
    /// already carry `line N:`, giving `file:N: ...`.
    pub(crate) fn in_file(self, path: &Path) -> Self {
        match self {
            CliError::Data(m) => match m.strip_prefix("line ") {
                Some(rest) => CliError::Data(format!("{}:{rest}", path.display())),
                None => CliError::Data(format!("{}: {m}", path.display())),
            },
            other => other,
        }
    }
}

impl From<CorpusError> for CliError {
    fn from(e: CorpusError) -> Self {
        match e {
            CorpusError::InvalidFractions(_) | CorpusError::InvalidPercent(_) | CorpusError::InvalidSynthetic(_) => {
                CliError::Config(e.to_string())
            }
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<EmbeddingError> for CliError {
    fn from(e: EmbeddingError) -> Self {
        match e {
            EmbeddingError::ZeroDim => CliError::Config(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<RuleError> for CliError {
    fn from(e: RuleError) -> Self {
        match e {
            RuleError::MissingStore | RuleError::BadThreshold(_) => CliError::Config(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<AutodiffError> for CliError {
    fn from(e: AutodiffError) -> Self {
        match e {
            AutodiffError::NonFinite(_) => CliError::Numeric(e.to_string()),
            AutodiffError::BadRate(_) => CliError::Config(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<MetricsError> for CliError {
    fn from(e: MetricsError) -> Self {
        match e {
            MetricsError::BadBudget(_) | MetricsError::EmptyGrid => CliError::Config(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        match e {
            ModelError::Config(_) => CliError::Config(e.to_string()),
            ModelError::NonFinite { .. } => CliError::Numeric(e.to_string()),
            ModelError::Io { path, source } => CliError::Io {
                path: path.into(),
                source,
            },
            ModelError::Autodiff(e) => e.into(),
            ModelError::Rule(e) => e.into(),
            ModelError::Embedding(e) => e.into(),
            ModelError::Metrics(e) => e.into(),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<ruletag::Error> for CliError {
    fn from(e: ruletag::Error) -> Self {
        match e {
            ruletag::Error::Corpus(e) => e.into(),
            ruletag::Error::Embedding(e) => e.into(),
            ruletag::Error::Rule(e) => e.into(),
            ruletag::Error::Autodiff(e) => e.into(),
            ruletag::Error::Model(e) => e.into(),
            ruletag::Error::Metrics(e) => e.into(),
        }
    }
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;
