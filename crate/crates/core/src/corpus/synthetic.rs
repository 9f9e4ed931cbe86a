use std::collections::BTreeMap;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{CorpusError, Sentence, TagSet, Token};
use crate::rules::{compile_dictionaries, DictionaryFile, DictionarySet};

const EVENT_NAMES: [&str; 10] = [
    "FLOOD",
    "EARTHQUAKE",
    "FIRE",
    "CYCLONE",
    "LANDSLIDE",
    "DROUGHT",
    "EPIDEMIC",
    "TSUNAMI",
    "STORM",
    "HEATWAVE",
];

const NEGATIVE_WORDS: [&str; 5] = ["possibility", "likely", "rumour", "feared", "may"];

fn default_words_per_tag() -> usize {
    4
}
fn default_coverage() -> f64 {
    1.0
}
fn default_sentences_per_doc() -> usize {
    4
}
fn default_min_len() -> usize {
    6
}
fn default_max_len() -> usize {
    12
}

/// Parameters of the synthetic event corpus.
///
/// Each non-negated sentence carries exactly one trigger word, tagged with
/// its event label; everything else is filler tagged `O`. Negated sentences
/// contain a trigger and a negative-dictionary word and are tagged `O`
/// throughout. Label frequencies follow `(rank + 1)^-skew`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticConfig {
    pub num_tags: usize,
    pub num_sentences: usize,
    /// Number of distinct filler words.
    pub vocab_size: usize,
    pub skew: f64,
    pub negated_fraction: f64,
    pub seed: u64,
    #[serde(default = "default_words_per_tag")]
    pub words_per_tag: usize,
    /// Fraction of each tag's trigger words listed in the dictionary.
    #[serde(default = "default_coverage")]
    pub dictionary_coverage: f64,
    #[serde(default = "default_sentences_per_doc")]
    pub sentences_per_doc: usize,
    #[serde(default = "default_min_len")]
    pub min_len: usize,
    #[serde(default = "default_max_len")]
    pub max_len: usize,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            num_tags: 8,
            num_sentences: 200,
            vocab_size: 60,
            skew: 1.5,
            negated_fraction: 0.0,
            seed: 1,
            words_per_tag: default_words_per_tag(),
            dictionary_coverage: default_coverage(),
            sentences_per_doc: default_sentences_per_doc(),
            min_len: default_min_len(),
            max_len: default_max_len(),
        }
    }
}

impl SyntheticConfig {
    fn validate(&self) -> Result<(), CorpusError> {
        let bad = |m: &str| Err(CorpusError::InvalidSynthetic(m.to_string()));
        if self.num_tags < 2 {
            return bad("num_tags must be at least 2");
        }
        if self.num_sentences < 10 {
            return bad("num_sentences must be at least 10");
        }
        if self.vocab_size == 0 || self.words_per_tag == 0 || self.sentences_per_doc == 0 {
            return bad("vocab_size, words_per_tag and sentences_per_doc must be positive");
        }
        if !(self.skew >= 0.0 && self.skew.is_finite()) {
            return bad("skew must be finite and non-negative");
        }
        if !(0.0..=1.0).contains(&self.negated_fraction) {
            return bad("negated_fraction must lie in [0, 1]");
        }
        if !(0.0..=1.0).contains(&self.dictionary_coverage) {
            return bad("dictionary_coverage must lie in [0, 1]");
        }
        if self.min_len < 2 || self.max_len < self.min_len {
            return bad("need 2 <= min_len <= max_len");
        }
        Ok(())
    }

    /// Tag name of the label with design rank `rank` (0 = most frequent).
    pub fn tag_name(rank: usize) -> String {
        EVENT_NAMES
            .get(rank)
            .map(|s| s.to_string())
            .unwrap_or_else(|| format!("EVENT-{rank}"))
    }

    /// Surface form of trigger word `j` of the label with rank `rank`.
    pub fn trigger_word(rank: usize, j: usize) -> String {
        format!("{}{}", Self::tag_name(rank).to_lowercase(), j)
    }
}

pub struct SyntheticCorpus {
    pub sentences: Vec<Sentence>,
    pub tags: TagSet,
    pub dictionaries: DictionarySet,
    pub dictionary_file: DictionaryFile,
}

/// Largest-remainder allocation of `total` items proportional to `weights`.
fn quotas(weights: &[f64], total: usize) -> Vec<usize> {
    let sum: f64 = weights.iter().sum();
    let exact: Vec<f64> = weights.iter().map(|w| w / sum * total as f64).collect();
    let mut counts: Vec<usize> = exact.iter().map(|e| e.floor() as usize).collect();
    let mut rest = total - counts.iter().sum::<usize>();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| {
        let fa = exact[a] - exact[a].floor();
        let fb = exact[b] - exact[b].floor();
        fb.total_cmp(&fa).then(a.cmp(&b))
    });
    for i in order {
        if rest == 0 {
            break;
        }
        counts[i] += 1;
        rest -= 1;
    }
    counts
}

/// Generates a deterministic corpus whose event tags are planted by
/// trigger words, together with dictionaries that list those words.
pub fn generate_synthetic(
    config: &SyntheticConfig,
    seed: u64,
) -> Result<SyntheticCorpus, CorpusError> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut tags = TagSet::new();
    let tag_ids: Vec<usize> = (0..config.num_tags)
        .map(|r| tags.intern(&SyntheticConfig::tag_name(r)))
        .collect();
    let triggers: Vec<Vec<String>> = (0..config.num_tags)
        .map(|r| {
            (0..config.words_per_tag)
                .map(|j| SyntheticConfig::trigger_word(r, j))
                .collect()
        })
        .collect();
    let filler: Vec<String> = (0..config.vocab_size).map(|i| format!("w{i}")).collect();

    let weights: Vec<f64> = (0..config.num_tags)
        .map(|r| ((r + 1) as f64).powf(-config.skew))
        .collect();
    let negated = (config.negated_fraction * config.num_sentences as f64).round() as usize;
    let labeled = config.num_sentences - negated;

    // One entry per sentence: Some(rank) for labeled sentences, None for negated.
    let mut plan: Vec<Option<usize>> = quotas(&weights, labeled)
        .into_iter()
        .enumerate()
        .flat_map(|(rank, n)| std::iter::repeat_n(Some(rank), n))
        .chain(std::iter::repeat_n(None, negated))
        .collect();
    plan.shuffle(&mut rng);

    let mut sentences = Vec::with_capacity(config.num_sentences);
    for (idx, slot) in plan.into_iter().enumerate() {
        let len = rng.random_range(config.min_len..=config.max_len);
        let mut tokens: Vec<Token> = (0..len)
            .map(|_| Token {
                surface: filler.choose(&mut rng).unwrap().clone(),
                tag: tags.other(),
            })
            .collect();
        let trigger_pos = rng.random_range(0..len);
        match slot {
            Some(rank) => {
                tokens[trigger_pos] = Token {
                    surface: triggers[rank].choose(&mut rng).unwrap().clone(),
                    tag: tag_ids[rank],
                };
            }
            None => {
                let rank = sample_rank(&weights, &mut rng);
                tokens[trigger_pos].surface = triggers[rank].choose(&mut rng).unwrap().clone();
                let mut neg_pos = rng.random_range(0..len - 1);
                if neg_pos >= trigger_pos {
                    neg_pos += 1;
                }
                tokens[neg_pos].surface = NEGATIVE_WORDS.choose(&mut rng).unwrap().to_string();
            }
        }
        sentences.push(Sentence {
            doc_id: (idx / config.sentences_per_doc) as u64,
            tokens,
        });
    }

    let listed = (config.dictionary_coverage * config.words_per_tag as f64).ceil() as usize;
    let synonyms: BTreeMap<String, Vec<String>> = (0..config.num_tags)
        .map(|r| {
            (
                SyntheticConfig::tag_name(r),
                triggers[r][..listed.min(config.words_per_tag)].to_vec(),
            )
        })
        .collect();
    let dictionary_file = DictionaryFile {
        synonyms,
        negative: NEGATIVE_WORDS.iter().map(|s| s.to_string()).collect(),
    };
    let dictionaries = compile_dictionaries(&dictionary_file, &tags, true)
        .expect("synthetic dictionaries only name generated tags");

    Ok(SyntheticCorpus {
        sentences,
        tags,
        dictionaries,
        dictionary_file,
    })
}

fn sample_rank(weights: &[f64], rng: &mut impl Rng) -> usize {
    let total: f64 = weights.iter().sum();
    let mut u = rng.random::<f64>() * total;
    for (i, w) in weights.iter().enumerate() {
        if u < *w {
            return i;
        }
        u -= w;
    }
    weights.len() - 1
}
