use std::collections::{BTreeSet, HashMap};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::distill::project_teacher;
use super::{InferenceSource, ModelError, TagDistribution, Variant, VariantConfig};
use crate::autodiff::{bi_encode, softmax, LstmSpec, ModelParameters, Tape, Tensor, Var};
use crate::corpus::{TagId, TagSet};
use crate::embeddings::{EmbeddingSettings, EmbeddingStore};
use crate::rules::{apply_rules, DictionarySet, RuleVector};

pub const EMBEDDING: &str = "embedding";
pub const OUT_WEIGHT: &str = "out.weight";
pub const OUT_BIAS: &str = "out.bias";

/// A trained or freshly initialized tagger of one variant.
#[derive(Debug, Clone)]
pub struct Tagger {
    config: VariantConfig,
    tags: TagSet,
    vocab: Vec<String>,
    index: HashMap<String, usize>,
    params: ModelParameters,
    frozen_embedding: Option<Tensor>,
    fallback: EmbeddingStore,
    dictionaries: DictionarySet,
}

fn word_encoder(config: &VariantConfig, num_tags: usize) -> (LstmSpec, LstmSpec) {
    let input = match config.variant {
        Variant::B => config.dim + num_tags,
        _ => config.dim,
    };
    (
        LstmSpec::new("word.fwd", input, config.hidden),
        LstmSpec::new("word.bwd", input, config.hidden),
    )
}

fn rule_encoder(config: &VariantConfig, num_tags: usize) -> (LstmSpec, LstmSpec) {
    (
        LstmSpec::new("rule.fwd", num_tags, config.rule_hidden),
        LstmSpec::new("rule.bwd", num_tags, config.rule_hidden),
    )
}

fn head_input(config: &VariantConfig) -> usize {
    match config.variant {
        Variant::C => 2 * config.hidden + 2 * config.rule_hidden,
        _ => 2 * config.hidden,
    }
}

impl Tagger {
    /// Initializes a tagger whose embedding table covers `vocab`, seeded from
    /// `store` (pre-trained vectors or OOV draws).
    pub fn new<I, S>(
        config: VariantConfig,
        tags: TagSet,
        dictionaries: DictionarySet,
        store: &mut EmbeddingStore,
        vocab: I,
        seed: u64,
    ) -> Result<Self, ModelError>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        config.validate()?;
        if store.dim() != config.dim {
            return Err(ModelError::Config(format!(
                "embedding store has dimension {}, config expects {}",
                store.dim(),
                config.dim
            )));
        }
        if dictionaries.num_tags != tags.len() {
            return Err(ModelError::Config(format!(
                "dictionaries built for {} tags, tag set has {}",
                dictionaries.num_tags,
                tags.len()
            )));
        }
        let vocab: Vec<String> = vocab
            .into_iter()
            .map(|w| w.as_ref().to_string())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();

        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = ModelParameters::new();
        let k = tags.len();
        let (fwd, bwd) = word_encoder(&config, k);
        fwd.init(&mut params, &mut rng);
        bwd.init(&mut params, &mut rng);
        if config.variant == Variant::C {
            let (rf, rb) = rule_encoder(&config, k);
            rf.init(&mut params, &mut rng);
            rb.init(&mut params, &mut rng);
        }
        let fan_in = head_input(&config);
        let bound = (6.0 / (fan_in + k) as f64).sqrt();
        let w = (0..k * fan_in).map(|_| rng.random_range(-bound..bound)).collect();
        params.insert(OUT_WEIGHT, Tensor::matrix(k, fan_in, w)?);
        params.insert(OUT_BIAS, Tensor::zeros(&[k]));

        let table_rows: Vec<f64> = if vocab.is_empty() {
            vec![0.0; config.dim]
        } else {
            vocab.iter().flat_map(|w| store.lookup(w).to_vec()).collect()
        };
        let table = Tensor::matrix(vocab.len().max(1), config.dim, table_rows)?;
        let frozen_embedding = if config.trainable_embeddings {
            params.insert(EMBEDDING, table);
            None
        } else {
            Some(table)
        };

        let settings = EmbeddingSettings {
            trainable: config.trainable_embeddings,
            ..store.settings()
        };
        Self::from_parts(config, tags, vocab, params, frozen_embedding, settings, dictionaries)
    }

    /// Reassembles a tagger from persisted pieces, checking every shape.
    pub fn from_parts(
        config: VariantConfig,
        tags: TagSet,
        vocab: Vec<String>,
        params: ModelParameters,
        frozen_embedding: Option<Tensor>,
        embedding: EmbeddingSettings,
        dictionaries: DictionarySet,
    ) -> Result<Self, ModelError> {
        config.validate()?;
        let index = vocab.iter().enumerate().map(|(i, w)| (w.clone(), i)).collect();
        let fallback = EmbeddingStore::from_settings(embedding)?;
        let tagger = Tagger {
            config,
            tags,
            vocab,
            index,
            params,
            frozen_embedding,
            fallback,
            dictionaries,
        };
        tagger.check_shapes()?;
        Ok(tagger)
    }

    fn check_shapes(&self) -> Result<(), ModelError> {
        let k = self.tags.len();
        let mut tape = Tape::new();
        let (fwd, bwd) = word_encoder(&self.config, k);
        fwd.bind(&mut tape, &self.params)?;
        bwd.bind(&mut tape, &self.params)?;
        if self.config.variant == Variant::C {
            let (rf, rb) = rule_encoder(&self.config, k);
            rf.bind(&mut tape, &self.params)?;
            rb.bind(&mut tape, &self.params)?;
        }
        let w = self.params.get(OUT_WEIGHT)?;
        let b = self.params.get(OUT_BIAS)?;
        if w.shape() != [k, head_input(&self.config)] || b.shape() != [k] {
            return Err(ModelError::Config(format!(
                "output head {:?}/{:?} does not fit {} tags",
                w.shape(),
                b.shape(),
                k
            )));
        }
        let table = match &self.frozen_embedding {
            Some(t) => t,
            None => self.params.get(EMBEDDING)?,
        };
        if table.shape() != [self.vocab.len().max(1), self.config.dim] {
            return Err(ModelError::Config(format!(
                "embedding table {:?} does not fit {} words of dimension {}",
                table.shape(),
                self.vocab.len(),
                self.config.dim
            )));
        }
        Ok(())
    }

    pub fn config(&self) -> &VariantConfig {
        &self.config
    }

    pub fn variant(&self) -> Variant {
        self.config.variant
    }

    pub fn tags(&self) -> &TagSet {
        &self.tags
    }

    pub fn vocab(&self) -> &[String] {
        &self.vocab
    }

    pub fn params(&self) -> &ModelParameters {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ModelParameters {
        &mut self.params
    }

    pub fn frozen_embedding(&self) -> Option<&Tensor> {
        self.frozen_embedding.as_ref()
    }

    pub fn embedding_settings(&self) -> EmbeddingSettings {
        EmbeddingSettings {
            trainable: self.config.trainable_embeddings,
            ..self.fallback.settings()
        }
    }

    pub fn dictionaries(&self) -> &DictionarySet {
        &self.dictionaries
    }

    /// Rule vectors for `words` under this tagger's dictionaries and rule config.
    pub fn rule_vectors<S: AsRef<str>>(
        &self,
        words: &[S],
        store: Option<&EmbeddingStore>,
    ) -> Result<Vec<RuleVector>, ModelError> {
        let store = store.unwrap_or(&self.fallback);
        Ok(apply_rules(words, &self.dictionaries, &self.config.rules, Some(store))?)
    }

    fn embed(&self, tape: &mut Tape, word: &str, store: Option<&EmbeddingStore>) -> Result<Var, ModelError> {
        if let Some(&row) = self.index.get(word) {
            return Ok(match &self.frozen_embedding {
                Some(t) => tape.constant(Tensor::vector(t.row(row).to_vec())),
                None => tape.param_row(EMBEDDING, self.params.get(EMBEDDING)?, row)?,
            });
        }
        let v = store.unwrap_or(&self.fallback).vector(word).into_owned();
        if v.len() != self.config.dim {
            return Err(ModelError::Config(format!(
                "fallback vector for `{word}` has dimension {}, expected {}",
                v.len(),
                self.config.dim
            )));
        }
        Ok(tape.constant(Tensor::vector(v)))
    }

    /// Records the forward pass on `tape` and returns per-token logits.
    /// Dropout is active iff `dropout_rng` is given.
    pub fn logits<S: AsRef<str>>(
        &self,
        tape: &mut Tape,
        words: &[S],
        rules: Option<&[RuleVector]>,
        store: Option<&EmbeddingStore>,
        mut dropout_rng: Option<&mut ChaCha8Rng>,
    ) -> Result<Vec<Var>, ModelError> {
        let n = words.len();
        if n == 0 {
            return Err(ModelError::EmptySentence);
        }
        let k = self.tags.len();
        let rules = match (self.config.variant, rules) {
            (Variant::B | Variant::C, None) => return Err(ModelError::MissingRules),
            (_, Some(r)) if r.len() != n => {
                return Err(ModelError::RuleLength {
                    expected: n,
                    got: r.len(),
                })
            }
            (_, r) => r,
        };
        if let Some(r) = rules {
            if let Some(bad) = r.iter().find(|v| v.len() != k) {
                return Err(ModelError::RuleLength {
                    expected: k,
                    got: bad.len(),
                });
            }
        }

        let training = dropout_rng.is_some();
        let rate = self.config.dropout;
        let mut apply_dropout = |tape: &mut Tape, v: Var| -> Result<Var, ModelError> {
            match dropout_rng.as_deref_mut() {
                Some(rng) => Ok(tape.dropout(v, rate, training, rng)?),
                None => Ok(v),
            }
        };

        let mut word_inputs = Vec::with_capacity(n);
        for (i, w) in words.iter().enumerate() {
            let e = self.embed(tape, w.as_ref(), store)?;
            let x = if self.config.variant == Variant::B {
                let r = tape.constant(Tensor::vector(rules.unwrap()[i].as_f64()));
                tape.concat(&[e, r])
            } else {
                e
            };
            word_inputs.push(apply_dropout(tape, x)?);
        }

        let (fwd, bwd) = word_encoder(&self.config, k);
        let fwd = fwd.bind(tape, &self.params)?;
        let bwd = bwd.bind(tape, &self.params)?;
        let words_state = bi_encode(tape, &word_inputs, &fwd, &bwd)?;

        let rule_state = if self.config.variant == Variant::C {
            let (rf, rb) = rule_encoder(&self.config, k);
            let rf = rf.bind(tape, &self.params)?;
            let rb = rb.bind(tape, &self.params)?;
            let inputs: Vec<Var> = rules
                .unwrap()
                .iter()
                .map(|r| tape.constant(Tensor::vector(r.as_f64())))
                .collect();
            Some(bi_encode(tape, &inputs, &rf, &rb)?)
        } else {
            None
        };

        let w = tape.param(OUT_WEIGHT, self.params.get(OUT_WEIGHT)?);
        let b = tape.param(OUT_BIAS, self.params.get(OUT_BIAS)?);
        let mut out = Vec::with_capacity(n);
        for i in 0..n {
            let mut parts = vec![words_state.forward[i], words_state.backward[i]];
            if let Some(rs) = &rule_state {
                parts.push(rs.forward[i]);
                parts.push(rs.backward[i]);
            }
            let hidden = tape.concat(&parts);
            let z = tape.matvec(w, hidden)?;
            out.push(tape.add(z, b)?);
        }
        Ok(out)
    }

    /// Student distributions in evaluation mode (no dropout).
    pub fn forward<S: AsRef<str>>(
        &self,
        words: &[S],
        rules: Option<&[RuleVector]>,
        store: Option<&EmbeddingStore>,
    ) -> Result<Vec<TagDistribution>, ModelError> {
        let mut tape = Tape::new();
        let logits = self.logits(&mut tape, words, rules, store, None)?;
        Ok(logits
            .into_iter()
            .map(|z| TagDistribution::new_unchecked(softmax(tape.value(z).data())))
            .collect())
    }

    /// Tag ids for `words`. Variant D uses the teacher projection unless the
    /// config asks for the student.
    pub fn predict<S: AsRef<str>>(
        &self,
        words: &[S],
        rules: Option<&[RuleVector]>,
        store: Option<&EmbeddingStore>,
    ) -> Result<Vec<TagId>, ModelError> {
        let student = self.forward(words, rules, store)?;
        if self.config.variant != Variant::D || self.config.distill.inference_source == InferenceSource::Student {
            return Ok(student.iter().map(TagDistribution::argmax).collect());
        }
        let rules = rules.ok_or(ModelError::MissingRules)?;
        student
            .iter()
            .zip(rules)
            .map(|(p, r)| Ok(project_teacher(p, r, &self.config.distill)?.argmax()))
            .collect()
    }

    /// Computes rule vectors itself when the variant needs them.
    pub fn predict_words<S: AsRef<str>>(
        &self,
        words: &[S],
        store: Option<&EmbeddingStore>,
    ) -> Result<Vec<TagId>, ModelError> {
        let rules = if self.config.variant.uses_rules() {
            Some(self.rule_vectors(words, store)?)
        } else {
            None
        };
        self.predict(words, rules.as_deref(), store)
    }
}

fn expect_variant(tagger: &Tagger, variant: Variant) -> Result<(), ModelError> {
    if tagger.variant() == variant {
        Ok(())
    } else {
        Err(ModelError::Config(format!(
            "tagger is variant {}, not {variant}",
            tagger.variant()
        )))
    }
}

/// Baseline distributions: embeddings through the BiLSTM.
pub fn forward_a<S: AsRef<str>>(
    tagger: &Tagger,
    words: &[S],
    store: Option<&EmbeddingStore>,
) -> Result<Vec<TagDistribution>, ModelError> {
    expect_variant(tagger, Variant::A)?;
    tagger.forward(words, None, store)
}

/// Distributions with the rule vector appended to every embedding.
pub fn forward_b<S: AsRef<str>>(
    tagger: &Tagger,
    words: &[S],
    rules: &[RuleVector],
    store: Option<&EmbeddingStore>,
) -> Result<Vec<TagDistribution>, ModelError> {
    expect_variant(tagger, Variant::B)?;
    tagger.forward(words, Some(rules), store)
}

/// Distributions from the word and rule encoders side by side.
pub fn forward_c<S: AsRef<str>>(
    tagger: &Tagger,
    words: &[S],
    rules: &[RuleVector],
    store: Option<&EmbeddingStore>,
) -> Result<Vec<TagDistribution>, ModelError> {
    expect_variant(tagger, Variant::C)?;
    tagger.forward(words, Some(rules), store)
}

/// Variant-D prediction through the teacher or student, per config.
pub fn predict_d<S: AsRef<str>>(
    tagger: &Tagger,
    words: &[S],
    rules: &[RuleVector],
    store: Option<&EmbeddingStore>,
) -> Result<Vec<TagId>, ModelError> {
    expect_variant(tagger, Variant::D)?;
    tagger.predict(words, Some(rules), store)
}
