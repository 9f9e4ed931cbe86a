//! Reference implementations and helpers shared by the integration tests.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;
use ruletag::autodiff::{ModelParameters, Tape, Var};
use ruletag::corpus::{TagId, TagSet};
use ruletag::rules::DictionarySet;

/// Direct transcription of the rule-vector algorithm: sentence-wide negative
/// check, then every (tag, window offset) pair, then the other fallback.
#[allow(clippy::needless_range_loop)]
pub fn brute_force_rules(
    words: &[String],
    synonyms: &BTreeMap<TagId, BTreeSet<String>>,
    negative: &BTreeSet<String>,
    num_tags: usize,
    window: usize,
) -> Vec<Vec<bool>> {
    let n = words.len() as i64;
    let l = window as i64;
    let mut negated = false;
    for w in words {
        if negative.contains(w) {
            negated = true;
        }
    }
    let mut out = Vec::new();
    for i in 0..n {
        let mut bits = vec![false; num_tags];
        if negated {
            bits[0] = true;
            out.push(bits);
            continue;
        }
        let mut fired = false;
        for t in 1..num_tags {
            for j in (i - l)..=(i + l) {
                if j < 0 || j >= n {
                    continue;
                }
                if let Some(syn) = synonyms.get(&t) {
                    if syn.contains(&words[j as usize]) {
                        bits[t] = true;
                        fired = true;
                    }
                }
            }
        }
        if !fired {
            bits[0] = true;
        }
        out.push(bits);
    }
    out
}

/// A random sentence over a small lowercase vocabulary with dictionaries that
/// overlap across tags and an occasional negative word.
pub fn random_rule_instance(rng: &mut impl Rng) -> (Vec<String>, DictionarySet, usize) {
    let vocab: Vec<String> = (0..12).map(|i| format!("v{i}")).collect();
    let num_tags = rng.random_range(2..=5);
    let mut synonyms: BTreeMap<TagId, BTreeSet<String>> = BTreeMap::new();
    for t in 1..num_tags {
        let k = rng.random_range(0..=3);
        let set: BTreeSet<String> = (0..k)
            .map(|_| vocab[rng.random_range(0..vocab.len())].clone())
            .collect();
        if !set.is_empty() {
            synonyms.insert(t, set);
        }
    }
    let mut negative = BTreeSet::new();
    if rng.random_bool(0.3) {
        negative.insert(vocab[rng.random_range(0..vocab.len())].clone());
    }
    let n = rng.random_range(1..=10);
    let words = (0..n)
        .map(|_| vocab[rng.random_range(0..vocab.len())].clone())
        .collect();
    let window = rng.random_range(0..=3);
    (
        words,
        DictionarySet {
            synonyms,
            negative,
            num_tags,
        },
        window,
    )
}

/// Per-label (tp, fp, fn) by scanning once per label.
pub fn count_by_label(gold: &[TagId], pred: &[TagId], num_tags: usize) -> Vec<(usize, usize, usize)> {
    (0..num_tags)
        .map(|label| {
            let tp = gold.iter().zip(pred).filter(|(g, p)| **g == label && **p == label).count();
            let fp = gold.iter().zip(pred).filter(|(g, p)| **g != label && **p == label).count();
            let fn_ = gold.iter().zip(pred).filter(|(g, p)| **g == label && **p != label).count();
            (tp, fp, fn_)
        })
        .collect()
}

pub fn f1_from(tp: usize, fp: usize, fn_: usize) -> f64 {
    let p = if tp + fp == 0 { 0.0 } else { tp as f64 / (tp + fp) as f64 };
    let r = if tp + fn_ == 0 { 0.0 } else { tp as f64 / (tp + fn_) as f64 };
    if tp + fp + fn_ == 0 {
        1.0
    } else if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

/// Micro and macro F1 over non-other labels from [`count_by_label`].
pub fn reference_scores(gold: &[TagId], pred: &[TagId], num_tags: usize) -> (f64, f64) {
    let counts = count_by_label(gold, pred, num_tags);
    let (mut tp, mut fp, mut fn_) = (0, 0, 0);
    let mut per = Vec::new();
    for &(a, b, c) in &counts[1..] {
        tp += a;
        fp += b;
        fn_ += c;
        if a + c > 0 {
            per.push(f1_from(a, b, c));
        }
    }
    let micro = f1_from(tp, fp, fn_);
    let macro_ = if per.is_empty() {
        if fp == 0 {
            1.0
        } else {
            0.0
        }
    } else {
        per.iter().sum::<f64>() / per.len() as f64
    };
    (micro, macro_)
}

pub fn tags_with(n: usize) -> TagSet {
    let mut t = TagSet::new();
    for i in 0..n {
        t.intern(&format!("L{i}"));
    }
    t
}

/// Teacher reweighting written out term by term.
pub fn reference_teacher(p: &[f64], r: &[bool], c: f64) -> Vec<f64> {
    let w: Vec<f64> = p
        .iter()
        .zip(r)
        .map(|(pj, rj)| pj * (-c * (1.0 - if *rj { 1.0 } else { 0.0 })).exp())
        .collect();
    let z: f64 = w.iter().sum();
    w.iter().map(|x| x / z).collect()
}

#[derive(Debug)]
pub struct GradientMismatch {
    pub name: String,
    pub index: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub relative: f64,
}

pub fn relative_error(a: f64, n: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(1e-6)
}

/// Central finite differences (step `1e-5`) against the tape's gradients.
/// At most `per_tensor` entries of each parameter are probed, spread evenly.
/// Returns the worst entry.
pub fn check_gradients<F>(params: &ModelParameters, per_tensor: usize, loss: F) -> GradientMismatch
where
    F: Fn(&ModelParameters) -> (Tape, Var),
{
    const STEP: f64 = 1e-5;
    let (tape, out) = loss(params);
    let grads = tape.backward(out).expect("backward");
    let mut worst = GradientMismatch {
        name: String::new(),
        index: 0,
        analytic: 0.0,
        numeric: 0.0,
        relative: 0.0,
    };
    let names: Vec<String> = params.names().cloned().collect();
    for name in names {
        let len = params.get(&name).unwrap().len();
        let stride = (len / per_tensor.max(1)).max(1);
        for index in (0..len).step_by(stride).take(per_tensor) {
            let eval = |delta: f64| {
                let mut p = params.clone();
                p.get_mut(&name).unwrap().data_mut()[index] += delta;
                let (t, v) = loss(&p);
                t.scalar(v)
            };
            let numeric = (eval(STEP) - eval(-STEP)) / (2.0 * STEP);
            let analytic = grads.get(&name).map(|g| g.data()[index]).unwrap_or(0.0);
            let relative = relative_error(analytic, numeric);
            if relative >= worst.relative {
                worst = GradientMismatch {
                    name: name.clone(),
                    index,
                    analytic,
                    numeric,
                    relative,
                };
            }
        }
    }
    worst
}
