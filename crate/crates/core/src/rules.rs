//! Dictionary rules and the per-token multi-hot rule vector.
//!
//! A token gets bit `t` when any word within `window` positions of it is a
//! synonym of tag `t`; it gets only the `other` bit when nothing fires or when
//! the negative dictionary vetoes the sentence.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{TagId, TagSet, OTHER_TAG};
use crate::embeddings::{cosine, EmbeddingStore};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RuleError {
    #[error("dictionary names unknown tag `{0}`")]
    UnknownTag(String),
    #[error("the `{OTHER_TAG}` tag cannot carry a synonym dictionary")]
    ReservedTag,
    #[error("empty word in dictionary `{0}`")]
    EmptyWord(String),
    #[error("similarity matching needs an embedding store")]
    MissingStore,
    #[error("similarity threshold {0} outside (0, 1]")]
    BadThreshold(f64),
}

/// On-disk dictionary layout: `{"synonyms": {tag: [words]}, "negative": [words]}`.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct DictionaryFile {
    #[serde(default)]
    pub synonyms: BTreeMap<String, Vec<String>>,
    #[serde(default)]
    pub negative: Vec<String>,
}

/// Compiled synonym sets keyed by tag id, plus the negative word set.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DictionarySet {
    pub synonyms: BTreeMap<TagId, BTreeSet<String>>,
    pub negative: BTreeSet<String>,
    /// Length of the rule vectors this set produces (labels + other).
    pub num_tags: usize,
}

impl DictionarySet {
    pub fn empty(tags: &TagSet) -> Self {
        DictionarySet {
            synonyms: BTreeMap::new(),
            negative: BTreeSet::new(),
            num_tags: tags.len(),
        }
    }

    pub fn to_file(&self, tags: &TagSet) -> DictionaryFile {
        DictionaryFile {
            synonyms: self
                .synonyms
                .iter()
                .map(|(&t, words)| (tags.name(t).to_string(), words.iter().cloned().collect()))
                .collect(),
            negative: self.negative.iter().cloned().collect(),
        }
    }
}

fn fold(word: &str, case_fold: bool) -> String {
    if case_fold {
        word.to_lowercase()
    } else {
        word.to_string()
    }
}

pub fn compile_dictionaries(
    raw: &DictionaryFile,
    tags: &TagSet,
    case_fold: bool,
) -> Result<DictionarySet, RuleError> {
    let mut set = DictionarySet::empty(tags);
    for (name, words) in &raw.synonyms {
        let id = tags
            .id(name)
            .ok_or_else(|| RuleError::UnknownTag(name.clone()))?;
        if tags.is_other(id) {
            return Err(RuleError::ReservedTag);
        }
        let entry = set.synonyms.entry(id).or_default();
        for w in words {
            if w.is_empty() {
                return Err(RuleError::EmptyWord(name.clone()));
            }
            entry.insert(fold(w, case_fold));
        }
    }
    for w in &raw.negative {
        if w.is_empty() {
            return Err(RuleError::EmptyWord("negative".into()));
        }
        set.negative.insert(fold(w, case_fold));
    }
    Ok(set)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum MatchMode {
    #[default]
    Exact,
    Similarity,
}

/// Reach of the negative dictionary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum NegativeScope {
    /// A negative word anywhere in the sentence makes every token other-only.
    #[default]
    Sentence,
    /// Only the negative word itself becomes other-only.
    Token,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RuleConfig {
    /// Half-width `l` of the matching window.
    pub window: usize,
    pub match_mode: MatchMode,
    pub similarity_threshold: f64,
    pub case_fold: bool,
    pub negative_scope: NegativeScope,
}

impl Default for RuleConfig {
    fn default() -> Self {
        RuleConfig {
            window: 2,
            match_mode: MatchMode::Exact,
            similarity_threshold: 0.7,
            case_fold: true,
            negative_scope: NegativeScope::Sentence,
        }
    }
}

/// Multi-hot vector over the tag set; index 0 is `other`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RuleVector {
    bits: Vec<bool>,
}

impl RuleVector {
    pub fn other_only(num_tags: usize) -> Self {
        let mut bits = vec![false; num_tags];
        bits[0] = true;
        RuleVector { bits }
    }

    pub fn from_bits(bits: Vec<bool>) -> Self {
        RuleVector { bits }
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn is_set(&self, tag: TagId) -> bool {
        self.bits[tag]
    }

    pub fn is_other_only(&self) -> bool {
        self.bits[0] && self.bits[1..].iter().all(|b| !b)
    }

    /// Set bits as 0/1 reals, the form fed to the encoders.
    pub fn as_f64(&self) -> Vec<f64> {
        self.bits.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect()
    }

    pub fn to_csv(&self) -> String {
        self.bits
            .iter()
            .map(|&b| if b { "1" } else { "0" })
            .collect::<Vec<_>>()
            .join(",")
    }

    /// Checks the structural invariant: other alone, or labels without other.
    pub fn is_well_formed(&self) -> bool {
        let labels = self.bits[1..].iter().any(|&b| b);
        self.bits[0] != labels
    }
}

/// Builds one rule vector per word.
pub fn apply_rules<S: AsRef<str>>(
    words: &[S],
    dicts: &DictionarySet,
    config: &RuleConfig,
    store: Option<&EmbeddingStore>,
) -> Result<Vec<RuleVector>, RuleError> {
    let folded: Vec<String> = words
        .iter()
        .map(|w| fold(w.as_ref(), config.case_fold))
        .collect();
    let matches = match config.match_mode {
        MatchMode::Exact => exact_matches(&folded, dicts),
        MatchMode::Similarity => {
            let store = store.ok_or(RuleError::MissingStore)?;
            let threshold = config.similarity_threshold;
            if !(threshold > 0.0 && threshold <= 1.0) {
                return Err(RuleError::BadThreshold(threshold));
            }
            similarity_matches(&folded, dicts, store, threshold)
        }
    };

    let negated: Vec<bool> = folded.iter().map(|w| dicts.negative.contains(w)).collect();
    let sentence_negated = negated.iter().any(|&n| n);
    let n = words.len();
    let mut out = Vec::with_capacity(n);
    for (i, &token_negated) in negated.iter().enumerate() {
        let vetoed = match config.negative_scope {
            NegativeScope::Sentence => sentence_negated,
            NegativeScope::Token => token_negated,
        };
        if vetoed {
            out.push(RuleVector::other_only(dicts.num_tags));
            continue;
        }
        let lo = i.saturating_sub(config.window);
        let hi = (i + config.window).min(n - 1);
        let mut bits = vec![false; dicts.num_tags];
        for tags in &matches[lo..=hi] {
            for &t in tags {
                bits[t] = true;
            }
        }
        if bits.iter().all(|b| !b) {
            bits[0] = true;
        }
        out.push(RuleVector { bits });
    }
    Ok(out)
}

fn exact_matches(words: &[String], dicts: &DictionarySet) -> Vec<Vec<TagId>> {
    words
        .iter()
        .map(|w| {
            dicts
                .synonyms
                .iter()
                .filter(|(_, syn)| syn.contains(w))
                .map(|(&t, _)| t)
                .collect()
        })
        .collect()
}

fn similarity_matches(
    words: &[String],
    dicts: &DictionarySet,
    store: &EmbeddingStore,
    threshold: f64,
) -> Vec<Vec<TagId>> {
    let entries: Vec<(TagId, &String, Vec<f64>)> = dicts
        .synonyms
        .iter()
        .flat_map(|(&t, syn)| syn.iter().map(move |s| (t, s, store.vector(s).into_owned())))
        .collect();
    words
        .iter()
        .map(|w| {
            let v = store.vector(w);
            let mut tags: Vec<TagId> = entries
                .iter()
                .filter(|(_, s, sv)| *s == w || cosine(&v, sv) >= threshold)
                .map(|(t, _, _)| *t)
                .collect();
            tags.dedup();
            tags
        })
        .collect()
}

/// Lowest-indexed set bit of each vector; other-only vectors give `other`.
pub fn rule_only_predict(vectors: &[RuleVector]) -> Vec<TagId> {
    vectors
        .iter()
        .map(|v| v.bits.iter().position(|&b| b).unwrap_or(0))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::parse_corpus;

    fn tags(names: &[&str]) -> TagSet {
        let mut t = TagSet::new();
        for n in names {
            t.intern(n);
        }
        t
    }

    fn dict(pairs: &[(&str, &[&str])], negative: &[&str]) -> DictionaryFile {
        DictionaryFile {
            synonyms: pairs
                .iter()
                .map(|(t, ws)| (t.to_string(), ws.iter().map(|w| w.to_string()).collect()))
                .collect(),
            negative: negative.iter().map(|w| w.to_string()).collect(),
        }
    }

    fn exact(window: usize) -> RuleConfig {
        RuleConfig {
            window,
            ..RuleConfig::default()
        }
    }

    #[test]
    fn compile_flood_example() {
        let t = tags(&["FLOOD"]);
        let set = compile_dictionaries(
            &dict(&[("FLOOD", &["flood", "deluge", "flood"])], &["possibility"]),
            &t,
            true,
        )
        .unwrap();
        assert_eq!(set.synonyms.len(), 1);
        assert_eq!(set.synonyms[&1].len(), 2);
        assert_eq!(set.negative.len(), 1);
    }

    #[test]
    fn compile_errors() {
        let t = tags(&["FLOOD"]);
        assert_eq!(
            compile_dictionaries(&dict(&[("O", &["x"])], &[]), &t, true).unwrap_err(),
            RuleError::ReservedTag
        );
        assert_eq!(
            compile_dictionaries(&dict(&[("FIRE", &["x"])], &[]), &t, true).unwrap_err(),
            RuleError::UnknownTag("FIRE".into())
        );
        assert!(matches!(
            compile_dictionaries(&dict(&[("FLOOD", &[""])], &[]), &t, true),
            Err(RuleError::EmptyWord(_))
        ));
    }

    #[test]
    fn earthquake_sentence_window_zero() {
        let text = "A 2 O\nmoderate 2 O\nintensity 2 O\nearthquake 2 EARTHQUAKE\nmeasuring 2 O\n\
                    4.7 2 MAGNITUDE-ARG\nhit 2 O\nMeghalaya 2 PLACE-ARG\non 2 O\nMonday 2 TIME-ARG\n";
        let (sentences, tagset) = parse_corpus(text).unwrap();
        let set =
            compile_dictionaries(&dict(&[("EARTHQUAKE", &["earthquake"])], &[]), &tagset, true)
                .unwrap();
        let words: Vec<&str> = sentences[0].words();
        let vectors = apply_rules(&words, &set, &exact(0), None).unwrap();
        let quake = tagset.id("EARTHQUAKE").unwrap();
        for (i, v) in vectors.iter().enumerate() {
            if i == 3 {
                assert!(v.is_set(quake));
                assert!(!v.is_set(0));
                assert_eq!(v.bits().iter().filter(|b| **b).count(), 1);
            } else {
                assert!(v.is_other_only(), "token {i}");
            }
        }
    }

    #[test]
    fn negative_word_vetoes_sentence() {
        let t = tags(&["FLOODS"]);
        let set =
            compile_dictionaries(&dict(&[("FLOODS", &["floods"])], &["possibility"]), &t, true)
                .unwrap();
        let words: Vec<&str> =
            "There exists a strong possibility of spreading of Malaria after 2015 floods in Mumbai"
                .split(' ')
                .collect();
        let vectors = apply_rules(&words, &set, &exact(2), None).unwrap();
        assert!(vectors.iter().all(RuleVector::is_other_only));

        let token_scope = RuleConfig {
            negative_scope: NegativeScope::Token,
            ..exact(0)
        };
        let vectors = apply_rules(&words, &set, &token_scope, None).unwrap();
        assert!(vectors[11].is_set(1));
        assert!(vectors[4].is_other_only());
    }

    #[test]
    fn empty_dictionaries_give_other() {
        let t = tags(&["A", "B"]);
        let set = DictionarySet::empty(&t);
        let vectors = apply_rules(&["x", "y", "z"], &set, &exact(3), None).unwrap();
        assert!(vectors.iter().all(RuleVector::is_other_only));
        assert_eq!(vectors[0].len(), 3);
    }

    #[test]
    fn shared_word_sets_two_bits_across_window() {
        let t = tags(&["A", "B"]);
        let set =
            compile_dictionaries(&dict(&[("A", &["attack"]), ("B", &["attack"])], &[]), &t, true)
                .unwrap();
        let words = ["x", "y", "attack", "z", "w"];
        let vectors = apply_rules(&words, &set, &exact(1), None).unwrap();
        for (i, v) in vectors.iter().enumerate() {
            if (1..=3).contains(&i) {
                assert_eq!(v.bits(), &[false, true, true]);
            } else {
                assert!(v.is_other_only());
            }
        }
    }

    #[test]
    fn case_folding() {
        let t = tags(&["FLOOD"]);
        let set = compile_dictionaries(&dict(&[("FLOOD", &["Flood"])], &[]), &t, true).unwrap();
        let v = apply_rules(&["FLOOD"], &set, &exact(0), None).unwrap();
        assert!(v[0].is_set(1));
        let strict = RuleConfig {
            case_fold: false,
            ..exact(0)
        };
        let set = compile_dictionaries(&dict(&[("FLOOD", &["Flood"])], &[]), &t, false).unwrap();
        let v = apply_rules(&["FLOOD"], &set, &strict, None).unwrap();
        assert!(v[0].is_other_only());
    }

    #[test]
    fn similarity_mode() {
        let t = tags(&["FLOOD"]);
        let set = compile_dictionaries(&dict(&[("FLOOD", &["flood"])], &[]), &t, true).unwrap();
        let mut store = EmbeddingStore::empty(2).unwrap();
        store.insert("flood", vec![1.0, 0.0]).unwrap();
        store.insert("deluge", vec![0.9, 0.1]).unwrap();
        store.insert("sun", vec![0.0, 1.0]).unwrap();
        let cfg = RuleConfig {
            match_mode: MatchMode::Similarity,
            ..exact(0)
        };
        assert_eq!(
            apply_rules(&["deluge"], &set, &cfg, None).unwrap_err(),
            RuleError::MissingStore
        );
        let v = apply_rules(&["deluge", "sun", "flood"], &set, &cfg, Some(&store)).unwrap();
        assert!(v[0].is_set(1));
        assert!(v[1].is_other_only());
        assert!(v[2].is_set(1));
    }

    #[test]
    fn rule_only_tie_break() {
        assert_eq!(rule_only_predict(&[RuleVector::other_only(3)]), vec![0]);
        assert_eq!(
            rule_only_predict(&[RuleVector::from_bits(vec![false, false, true])]),
            vec![2]
        );
        assert_eq!(
            rule_only_predict(&[RuleVector::from_bits(vec![false, true, true])]),
            vec![1]
        );
    }

    #[test]
    fn dictionary_json_round_trip() {
        let t = tags(&["FLOOD", "FIRE"]);
        let raw: DictionaryFile =
            serde_json::from_str(r#"{"synonyms":{"FLOOD":["flood"],"FIRE":["blaze"]},"negative":["maybe"]}"#)
                .unwrap();
        let set = compile_dictionaries(&raw, &t, true).unwrap();
        let back = compile_dictionaries(&set.to_file(&t), &t, true).unwrap();
        assert_eq!(set, back);
    }
}
