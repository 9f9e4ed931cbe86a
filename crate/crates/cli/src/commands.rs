use std::collections::BTreeSet;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use ruletag::corpus::{
    iob_to_to, parse_corpus, parse_corpus_with_tags, split_corpus, subsample_train, write_corpus, CorpusSplit,
    Sentence, TagId, TagSet, Token,
};
use ruletag::embeddings::{load_vectors, EmbeddingStore};
use ruletag::metrics::{evaluate, run_ablation, select_tail_labels, AblationGrid, EvalReport};
use ruletag::models::{evaluate_tagger, predict_sentences, train, Checkpoint, Tagger, TrainingLog};
use ruletag::rules::{apply_rules, compile_dictionaries, rule_only_predict, DictionaryFile, DictionarySet};
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::{CliError, Result};

pub const CORPUS_FILE: &str = "corpus.tsv";
pub const TAGSET_FILE: &str = "tagset.json";
pub const SPLIT_FILE: &str = "split.json";
pub const RULES_FILE: &str = "rules.tsv";
pub const RULES_EVAL_FILE: &str = "rules_eval.json";
pub const CHECKPOINT_FILE: &str = "checkpoint.json";
pub const TRAIN_LOG_FILE: &str = "train_log.jsonl";
pub const REPORT_FILE: &str = "report.json";
pub const PREDICTIONS_FILE: &str = "predictions.tsv";
pub const GRID_FILE: &str = "grid.jsonl";
pub const SUMMARY_FILE: &str = "summary.csv";

/// Which part of the document split a command reads.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum SplitPart {
    All,
    Train,
    Val,
    #[default]
    Test,
}

impl SplitPart {
    fn select<'a>(self, sentences: &'a [Sentence], split: &'a CorpusSplit) -> &'a [Sentence] {
        match self {
            SplitPart::All => sentences,
            SplitPart::Train => &split.train,
            SplitPart::Val => &split.val,
            SplitPart::Test => &split.test,
        }
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, contents).map_err(|e| CliError::io(path, e))
}

fn json<T: Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("report serializes") + "\n"
}

fn output_dir(config: &RunConfig) -> Result<&Path> {
    let dir = config.output_dir.as_path();
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    Ok(dir)
}

fn corpus_text(sentences: &[Sentence], tags: &TagSet) -> String {
    let mut buf = Vec::new();
    write_corpus(sentences, tags, &mut buf).expect("writing to memory");
    String::from_utf8(buf).expect("corpus text is utf-8")
}

/// Reads a three-column corpus, converting IOB tags to the TO scheme when
/// any `B-`/`I-` tag is present.
pub fn load_corpus(path: &Path) -> Result<(Vec<Sentence>, TagSet)> {
    let text = read(path)?;
    let (sentences, tags) = parse_corpus(&text).map_err(|e| CliError::from(e).in_file(path))?;
    let iob = tags.names().iter().any(|t| t.starts_with("B-") || t.starts_with("I-"));
    if !iob {
        return Ok((sentences, tags));
    }
    let mut to_tags = TagSet::new();
    let mut out = Vec::with_capacity(sentences.len());
    for s in sentences {
        let names: Vec<&str> = s.tokens.iter().map(|t| tags.name(t.tag)).collect();
        let converted = iob_to_to(&names).map_err(|e| CliError::from(e).in_file(path))?;
        let tokens = s
            .tokens
            .into_iter()
            .zip(converted)
            .map(|(t, name)| Token {
                surface: t.surface,
                tag: to_tags.intern(&name),
            })
            .collect();
        out.push(Sentence {
            doc_id: s.doc_id,
            tokens,
        });
    }
    Ok((out, to_tags))
}

/// Parses `path` against the tag set of a trained model. Tags the model has
/// never seen are a data error.
fn load_corpus_for(path: &Path, tags: &TagSet) -> Result<Vec<Sentence>> {
    let (sentences, own_tags) = load_corpus(path)?;
    let text = corpus_text(&sentences, &own_tags);
    let (sentences, merged) = parse_corpus_with_tags(&text, tags.clone())?;
    if merged.len() != tags.len() {
        let unknown: Vec<&str> = merged.names()[tags.len()..].iter().map(String::as_str).collect();
        return Err(CliError::Data(format!(
            "{}: tags unknown to the model: {}",
            path.display(),
            unknown.join(", ")
        )));
    }
    Ok(sentences)
}

fn load_dictionaries(config: &RunConfig, tags: &TagSet) -> Result<DictionarySet> {
    let Some(path) = &config.dictionaries else {
        return Ok(DictionarySet::empty(tags));
    };
    let raw: DictionaryFile =
        serde_json::from_str(&read(path)?).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    compile_dictionaries(&raw, tags, config.case_fold).map_err(|e| CliError::from(e).in_file(path))
}

/// Pre-trained vectors when configured, otherwise an empty store of the
/// configured dimension. OOV vectors are seeded by `seed`.
fn load_store(path: Option<&Path>, dim: usize, seed: u64, trainable: bool) -> Result<EmbeddingStore> {
    let store = match path {
        Some(p) => {
            let store = load_vectors(&read(p)?).map_err(|e| CliError::from(e).in_file(p))?;
            if store.dim() != dim {
                return Err(CliError::Config(format!(
                    "{} has dimension {}, config says {dim}",
                    p.display(),
                    store.dim()
                )));
            }
            store
        }
        None => EmbeddingStore::empty(dim)?,
    };
    Ok(store.with_seed(seed).with_trainable(trainable))
}

fn split(config: &RunConfig, sentences: &[Sentence]) -> Result<CorpusSplit> {
    Ok(split_corpus(sentences, config.split, config.seed)?)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitManifest {
    pub fractions: [String; 3],
    pub seed: u64,
    pub train_docs: Vec<u64>,
    pub val_docs: Vec<u64>,
    pub test_docs: Vec<u64>,
}

impl SplitManifest {
    fn new(split: &CorpusSplit) -> Self {
        let f = split.fractions;
        SplitManifest {
            fractions: [f.train, f.val, f.test].map(|x| x.to_string()),
            seed: split.seed,
            train_docs: split.train_docs(),
            val_docs: split.val_docs(),
            test_docs: split.test_docs(),
        }
    }
}

/// Document, sentence and label counts of an ingested corpus.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestSummary {
    /// `(docs, sentences)` for train, val and test.
    pub parts: [(usize, usize); 3],
    pub tokens: usize,
    /// Labels other than `O`.
    pub labels: usize,
}

impl fmt::Display for IngestSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:<8} {:>8} {:>10}", "", "Doc", "Sen")?;
        for (name, (docs, sents)) in ["Train", "Val", "Test"].iter().zip(self.parts) {
            writeln!(f, "{name:<8} {docs:>8} {sents:>10}")?;
        }
        writeln!(f, "{:<8} {:>19}", "#Labels", self.labels)
    }
}

/// Parses and validates the corpus, then writes the normalized corpus, the
/// tag set and the document split under the output directory.
pub fn cmd_ingest(config: &RunConfig) -> Result<IngestSummary> {
    let path = config.require_corpus()?;
    let (sentences, tags) = load_corpus(path)?;
    let split = split(config, &sentences)?;
    let dir = output_dir(config)?;
    write(&dir.join(CORPUS_FILE), corpus_text(&sentences, &tags))?;
    write(&dir.join(TAGSET_FILE), json(&tags))?;
    write(&dir.join(SPLIT_FILE), json(&SplitManifest::new(&split)))?;
    let part = |s: &[Sentence]| (ruletag::corpus::doc_ids(s).len(), s.len());
    Ok(IngestSummary {
        parts: [part(&split.train), part(&split.val), part(&split.test)],
        tokens: sentences.iter().map(Sentence::len).sum(),
        labels: tags.labels().count(),
    })
}

/// Applies the dictionaries to every token of the chosen split and scores
/// the rule-only baseline. Writes one `token\tgold\tbits` line per token.
pub fn cmd_rules(config: &RunConfig, part: SplitPart) -> Result<EvalReport> {
    let path = config.require_corpus()?;
    let (sentences, tags) = load_corpus(path)?;
    let dicts = load_dictionaries(config, &tags)?;
    let store = match config.embeddings {
        Some(_) => Some(load_store(config.embeddings.as_deref(), config.dim, config.seed, false)?),
        None => None,
    };
    let split;
    let selected = match part {
        SplitPart::All => &sentences[..],
        _ => {
            split = self::split(config, &sentences)?;
            part.select(&sentences, &split)
        }
    };

    let rule_config = config.rule_config();
    let mut lines = String::new();
    let (mut gold, mut pred) = (Vec::new(), Vec::new());
    for s in selected {
        let words = s.words();
        let vectors = apply_rules(&words, &dicts, &rule_config, store.as_ref())?;
        for (token, v) in s.tokens.iter().zip(&vectors) {
            lines.push_str(&format!("{}\t{}\t{}\n", token.surface, tags.name(token.tag), v.to_csv()));
        }
        gold.extend(s.gold());
        pred.extend(rule_only_predict(&vectors));
    }
    let report = evaluate(&gold, &pred, &tags)?;
    let dir = output_dir(config)?;
    write(&dir.join(RULES_FILE), lines)?;
    write(&dir.join(RULES_EVAL_FILE), json(&report))?;
    Ok(report)
}

/// Trains one tagger on the (possibly subsampled) training split and writes
/// the checkpoint, the per-epoch log and the split manifest.
pub fn cmd_train(config: &RunConfig) -> Result<(Tagger, TrainingLog)> {
    let path = config.require_corpus()?;
    let (sentences, tags) = load_corpus(path)?;
    let dicts = load_dictionaries(config, &tags)?;
    let mut store = load_store(config.embeddings.as_deref(), config.dim, config.seed, config.trainable_embeddings)?;
    let split = subsample_train(&split(config, &sentences)?, config.percent, config.seed)?;
    let (tagger, log) = train(
        config.variant_config(),
        &split.train,
        &split.val,
        &tags,
        &dicts,
        &mut store,
        &config.train_options(),
    )?;
    let dir = output_dir(config)?;
    Checkpoint::from_tagger(&tagger).save(dir.join(CHECKPOINT_FILE))?;
    write(&dir.join(TRAIN_LOG_FILE), log.to_jsonl())?;
    write(&dir.join(SPLIT_FILE), json(&SplitManifest::new(&split)))?;
    Ok((tagger, log))
}

fn load_tagger(config: &RunConfig) -> Result<(Tagger, Option<EmbeddingStore>)> {
    let tagger = Checkpoint::load(config.require_checkpoint()?)?.into_tagger()?;
    let settings = tagger.embedding_settings();
    let store = match &config.embeddings {
        Some(p) => Some(load_store(Some(p), settings.dim, settings.oov_seed, settings.trainable)?),
        None => None,
    };
    Ok((tagger, store))
}

/// Scores a checkpoint on one part of the split. Tail labels come from the
/// full training part.
pub fn cmd_eval(config: &RunConfig, part: SplitPart) -> Result<EvalReport> {
    let (tagger, store) = load_tagger(config)?;
    let sentences = load_corpus_for(config.require_corpus()?, tagger.tags())?;
    let split = split(config, &sentences)?;
    let tail: BTreeSet<TagId> = select_tail_labels(&split.train, tagger.tags(), config.tail_budget, config.tail_unit)?;
    let report = evaluate_tagger(&tagger, part.select(&sentences, &split), store.as_ref(), Some(&tail))?;
    let dir = output_dir(config)?;
    write(&dir.join(REPORT_FILE), json(&report))?;
    Ok(report)
}

/// Reads whitespace-separated tokens, one per line, with blank lines between
/// sentences. A second column, if present, is the document id; any further
/// columns are ignored. Without one each sentence is its own document.
pub fn parse_raw_tokens(text: &str) -> Result<Vec<(u64, Vec<String>)>> {
    let mut out: Vec<(u64, Vec<String>)> = Vec::new();
    let mut current: Option<(u64, Vec<String>)> = None;
    for (idx, line) in text.lines().enumerate() {
        let cols: Vec<&str> = line.split_whitespace().collect();
        if cols.is_empty() {
            out.extend(current.take());
            continue;
        }
        let doc = match cols.get(1) {
            Some(d) => d
                .parse::<u64>()
                .map_err(|_| CliError::Data(format!("{}: doc id `{d}` is not a non-negative integer", idx + 1)))?,
            None => current.as_ref().map_or(out.len() as u64, |c| c.0),
        };
        match current.as_mut() {
            Some((d, _)) if *d != doc => {
                return Err(CliError::Data(format!(
                    "{}: doc id {doc} differs from {d} earlier in the same sentence",
                    idx + 1
                )))
            }
            Some((_, words)) => words.push(cols[0].to_string()),
            None => current = Some((doc, vec![cols[0].to_string()])),
        }
    }
    out.extend(current);
    if out.is_empty() {
        return Err(CliError::Data("no tokens".into()));
    }
    Ok(out)
}

/// Tags a raw token file and writes it in the three-column format.
pub fn cmd_predict(config: &RunConfig, input: &Path, output: Option<&Path>) -> Result<PathBuf> {
    let (tagger, store) = load_tagger(config)?;
    let raw = parse_raw_tokens(&read(input)?).map_err(|e| match e {
        CliError::Data(m) => CliError::Data(format!("{}:{m}", input.display())),
        other => other,
    })?;
    let sentences: Vec<Sentence> = raw
        .into_iter()
        .map(|(doc_id, words)| Sentence {
            doc_id,
            tokens: words
                .into_iter()
                .map(|surface| Token {
                    surface,
                    tag: tagger.tags().other(),
                })
                .collect(),
        })
        .collect();
    let predicted = predict_sentences(&tagger, &sentences, store.as_ref())?;
    let tagged: Vec<Sentence> = sentences
        .into_iter()
        .zip(predicted)
        .map(|(mut s, tags)| {
            for (t, tag) in s.tokens.iter_mut().zip(tags) {
                t.tag = tag;
            }
            s
        })
        .collect();
    let out = match output {
        Some(p) => p.to_path_buf(),
        None => output_dir(config)?.join(PREDICTIONS_FILE),
    };
    write(&out, corpus_text(&tagged, tagger.tags()))?;
    Ok(out)
}

/// Runs the variant x percent x seed grid and writes the per-cell JSONL and
/// the per-percent median CSV.
pub fn cmd_ablate(config: &RunConfig) -> Result<AblationGrid> {
    let (sentences, tags) = load_corpus(config.require_corpus()?)?;
    let dicts = load_dictionaries(config, &tags)?;
    let store = load_store(config.embeddings.as_deref(), config.dim, config.seed, config.trainable_embeddings)?;
    let split = split(config, &sentences)?;
    let grid = run_ablation(&config.ablation_spec(), &split, &tags, &dicts, &store)?;
    let dir = output_dir(config)?;
    write(&dir.join(GRID_FILE), grid.to_jsonl())?;
    write(&dir.join(SUMMARY_FILE), grid.summary_csv())?;
    Ok(grid)
}
