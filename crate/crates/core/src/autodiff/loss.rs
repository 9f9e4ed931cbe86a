use rand::Rng;

use super::{AutodiffError, Tensor};

/// Floor applied to the second argument of [`kl_divergence`].
pub const KL_FLOOR: f64 = 1e-12;

/// Max-shifted softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// `-ln softmax(logits)[gold]` computed through log-sum-exp, plus the probabilities.
pub fn softmax_cross_entropy(logits: &[f64], gold: usize) -> Result<(f64, Vec<f64>), AutodiffError> {
    if logits.len() < 2 {
        return Err(AutodiffError::TooFewClasses(logits.len()));
    }
    if gold >= logits.len() {
        return Err(AutodiffError::GoldOutOfRange {
            gold,
            classes: logits.len(),
        });
    }
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let log_sum = logits.iter().map(|z| (z - max).exp()).sum::<f64>().ln() + max;
    Ok((log_sum - logits[gold], softmax(logits)))
}

/// `Σ p_j ln(p_j / q_j)` with `0 ln 0 = 0` and `q` floored at [`KL_FLOOR`].
pub fn kl_divergence(p: &[f64], q: &[f64]) -> Result<f64, AutodiffError> {
    if p.len() != q.len() {
        return Err(AutodiffError::LengthMismatch {
            left: p.len(),
            right: q.len(),
        });
    }
    Ok(p.iter()
        .zip(q)
        .filter(|(pj, _)| **pj > 0.0)
        .map(|(pj, qj)| pj * (pj / qj.max(KL_FLOOR)).ln())
        .sum())
}

/// Inverted dropout mask: 0 with probability `rate`, else `1/(1-rate)`.
pub(crate) fn dropout_mask(len: usize, rate: f64, rng: &mut impl Rng) -> Vec<f64> {
    let keep = 1.0 / (1.0 - rate);
    (0..len)
        .map(|_| if rng.random::<f64>() < rate { 0.0 } else { keep })
        .collect()
}

pub(crate) fn check_rate(rate: f64) -> Result<(), AutodiffError> {
    if (0.0..1.0).contains(&rate) {
        Ok(())
    } else {
        Err(AutodiffError::BadRate(rate))
    }
}

/// Applies inverted dropout in training mode; identity otherwise.
pub fn dropout(
    x: &Tensor,
    rate: f64,
    training: bool,
    rng: &mut impl Rng,
) -> Result<Tensor, AutodiffError> {
    check_rate(rate)?;
    if !training || rate == 0.0 {
        return Ok(x.clone());
    }
    let mask = dropout_mask(x.len(), rate, rng);
    let data = x.data().iter().zip(&mask).map(|(v, m)| v * m).collect();
    Tensor::new(x.shape().to_vec(), data)
}
