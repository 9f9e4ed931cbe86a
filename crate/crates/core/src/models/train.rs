use std::collections::{BTreeSet, HashSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::distill::distill_loss_on_tape;
use super::{ModelError, Tagger, Variant, VariantConfig};
use crate::autodiff::{Adam, Gradients, Tape};
use crate::corpus::{Sentence, TagId, TagSet};
use crate::embeddings::EmbeddingStore;
use crate::metrics::{evaluate, evaluate_with_tail, EvalReport};
use crate::rules::{DictionarySet, RuleVector};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainOptions {
    pub epochs: usize,
    pub seed: u64,
    /// Keep the parameters of the epoch with the best validation micro-F1.
    pub select_best: bool,
}

impl Default for TrainOptions {
    fn default() -> Self {
        TrainOptions {
            epochs: 30,
            seed: 1,
            select_best: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub train_loss: f64,
    pub imitation: Option<f64>,
    pub val_micro_f1: Option<f64>,
    pub val_macro_f1: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingLog {
    pub variant: Variant,
    pub seed: u64,
    pub epochs: Vec<EpochLog>,
    /// Epoch whose parameters the returned tagger holds.
    pub selected_epoch: usize,
}

impl TrainingLog {
    /// One JSON object per epoch.
    pub fn to_jsonl(&self) -> String {
        self.epochs
            .iter()
            .map(|e| serde_json::to_string(e).expect("epoch log serializes") + "\n")
            .collect()
    }
}

fn sentence_rules(
    tagger: &Tagger,
    sentences: &[Sentence],
    store: &EmbeddingStore,
) -> Result<Vec<Option<Vec<RuleVector>>>, ModelError> {
    sentences
        .iter()
        .map(|s| {
            if tagger.variant().uses_rules() {
                Ok(Some(tagger.rule_vectors(&s.words(), Some(store))?))
            } else {
                Ok(None)
            }
        })
        .collect()
}

/// Predicted tags for every sentence, in order.
pub fn predict_sentences(
    tagger: &Tagger,
    sentences: &[Sentence],
    store: Option<&EmbeddingStore>,
) -> Result<Vec<Vec<TagId>>, ModelError> {
    sentences
        .par_iter()
        .map(|s| tagger.predict_words(&s.words(), store))
        .collect()
}

/// Scores `tagger` on `sentences`; adds the tail score when `tail` is given.
pub fn evaluate_tagger(
    tagger: &Tagger,
    sentences: &[Sentence],
    store: Option<&EmbeddingStore>,
    tail: Option<&BTreeSet<TagId>>,
) -> Result<EvalReport, ModelError> {
    let pred: Vec<TagId> = predict_sentences(tagger, sentences, store)?.concat();
    let gold: Vec<TagId> = sentences.iter().flat_map(|s| s.gold()).collect();
    Ok(match tail {
        Some(t) => evaluate_with_tail(&gold, &pred, tagger.tags(), t)?,
        None => evaluate(&gold, &pred, tagger.tags())?,
    })
}

fn sentence_loss(
    tagger: &Tagger,
    sentence: &Sentence,
    rules: Option<&[RuleVector]>,
    store: &EmbeddingStore,
    imitation: f64,
    rng: &mut ChaCha8Rng,
) -> Result<(f64, Gradients), ModelError> {
    let mut tape = Tape::new();
    let words = sentence.words();
    let logits = tagger.logits(&mut tape, &words, rules, Some(store), Some(rng))?;
    let gold = sentence.gold();
    let loss = if tagger.variant() == Variant::D {
        let rules = rules.ok_or(ModelError::MissingRules)?;
        distill_loss_on_tape(&mut tape, &logits, &gold, rules, &tagger.config().distill, imitation)?
    } else {
        let mut terms = Vec::with_capacity(logits.len());
        for (&z, &g) in logits.iter().zip(&gold) {
            terms.push(tape.softmax_cross_entropy(z, g)?);
        }
        let sum = tape.sum(&terms)?;
        tape.scale(sum, 1.0 / logits.len() as f64)
    };
    Ok((tape.scalar(loss), tape.backward(loss)?))
}

/// Trains one tagger with per-sentence Adam updates.
pub fn train(
    config: VariantConfig,
    train: &[Sentence],
    val: &[Sentence],
    tags: &TagSet,
    dictionaries: &DictionarySet,
    store: &mut EmbeddingStore,
    options: &TrainOptions,
) -> Result<(Tagger, TrainingLog), ModelError> {
    let train: Vec<&Sentence> = train.iter().filter(|s| !s.tokens.is_empty()).collect();
    if train.is_empty() {
        return Err(ModelError::EmptyTrain);
    }
    let vocab: HashSet<&str> = train
        .iter()
        .flat_map(|s| s.tokens.iter().map(|t| t.surface.as_str()))
        .collect();
    let mut tagger = Tagger::new(config, tags.clone(), dictionaries.clone(), store, vocab, options.seed)?;
    let store: &EmbeddingStore = store;

    let owned: Vec<Sentence> = train.iter().map(|s| (*s).clone()).collect();
    let rules = sentence_rules(&tagger, &owned, store)?;
    let val: Vec<Sentence> = val.iter().filter(|s| !s.tokens.is_empty()).cloned().collect();

    let mut adam = Adam::new(tagger.config().optimizer);
    let mut rng = ChaCha8Rng::seed_from_u64(options.seed.wrapping_add(0x9e37_79b9_7f4a_7c15));
    let mut order: Vec<usize> = (0..owned.len()).collect();
    let mut log = TrainingLog {
        variant: tagger.variant(),
        seed: options.seed,
        epochs: Vec::with_capacity(options.epochs),
        selected_epoch: 0,
    };
    let mut best: Option<(f64, crate::autodiff::ModelParameters)> = None;

    for epoch in 1..=options.epochs {
        order.shuffle(&mut rng);
        let imitation = tagger.config().distill.imitation_at(epoch);
        let mut total = 0.0;
        for &i in &order {
            let (loss, grads) = sentence_loss(&tagger, &owned[i], rules[i].as_deref(), store, imitation, &mut rng)?;
            let mut full = Gradients::zeros_like(tagger.params());
            full.accumulate(&grads);
            adam.step(tagger.params_mut(), &full)?;
            total += loss;
        }
        if let Some(name) = tagger.params().first_non_finite() {
            return Err(ModelError::NonFinite {
                epoch,
                name: name.to_string(),
            });
        }

        let (val_micro, val_macro) = if val.is_empty() {
            (None, None)
        } else {
            let r = evaluate_tagger(&tagger, &val, Some(store), None)?;
            (Some(r.micro_f1), Some(r.macro_f1))
        };
        log.epochs.push(EpochLog {
            epoch,
            train_loss: total / owned.len() as f64,
            imitation: (tagger.variant() == Variant::D).then_some(imitation),
            val_micro_f1: val_micro,
            val_macro_f1: val_macro,
        });

        match val_micro {
            Some(f) if options.select_best => {
                if best.as_ref().is_none_or(|(b, _)| f > *b) {
                    best = Some((f, tagger.params().clone()));
                    log.selected_epoch = epoch;
                }
            }
            _ => log.selected_epoch = epoch,
        }
    }

    if let Some((_, params)) = best {
        *tagger.params_mut() = params;
    }
    Ok((tagger, log))
}
