use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{AutodiffError, Gradients, ModelParameters};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimizerConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
    /// Gradients are rescaled to this global L2 norm when they exceed it.
    pub clip_norm: Option<f64>,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 0.0,
            clip_norm: Some(5.0),
        }
    }
}

/// Rescales `grads` in place so their global norm is at most `max_norm`.
/// Returns the norm before clipping.
pub fn clip_global_norm(grads: &mut Gradients, max_norm: f64) -> f64 {
    let norm = grads.global_norm();
    if norm > max_norm && norm > 0.0 {
        grads.scale(max_norm / norm);
    }
    norm
}

/// Adaptive-moment optimizer with bias-corrected first and second moments.
#[derive(Debug, Clone)]
pub struct Adam {
    config: OptimizerConfig,
    first: BTreeMap<String, Vec<f64>>,
    second: BTreeMap<String, Vec<f64>>,
    steps: u64,
}

impl Adam {
    pub fn new(config: OptimizerConfig) -> Self {
        Adam {
            config,
            first: BTreeMap::new(),
            second: BTreeMap::new(),
            steps: 0,
        }
    }

    pub fn config(&self) -> &OptimizerConfig {
        &self.config
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    /// Applies one update. `grads` must carry exactly the keys of `params`.
    pub fn step(&mut self, params: &mut ModelParameters, grads: &Gradients) -> Result<(), AutodiffError> {
        for name in params.names() {
            if grads.get(name).is_none() {
                return Err(AutodiffError::MissingGradient(name.clone()));
            }
        }
        if let Some(name) = grads.names().find(|n| !params.contains(n)) {
            return Err(AutodiffError::UnknownGradient(name.clone()));
        }

        let mut grads = grads.clone();
        if let Some(max) = self.config.clip_norm {
            clip_global_norm(&mut grads, max);
        }

        self.steps += 1;
        let c = self.config;
        let t = self.steps as i32;
        let correct1 = 1.0 - c.beta1.powi(t);
        let correct2 = 1.0 - c.beta2.powi(t);
        let names: Vec<String> = params.names().cloned().collect();
        for name in names {
            let g = grads.get(&name).unwrap();
            let p = params.get_mut(&name)?;
            if g.shape() != p.shape() {
                return Err(AutodiffError::Shape(format!(
                    "gradient {:?} for parameter `{name}` of shape {:?}",
                    g.shape(),
                    p.shape()
                )));
            }
            let m = self.first.entry(name.clone()).or_insert_with(|| vec![0.0; p.len()]);
            let v = self.second.entry(name.clone()).or_insert_with(|| vec![0.0; p.len()]);
            for (((w, gi), mi), vi) in p.data_mut().iter_mut().zip(g.data()).zip(m.iter_mut()).zip(v.iter_mut()) {
                let gi = gi + c.weight_decay * *w;
                *mi = c.beta1 * *mi + (1.0 - c.beta1) * gi;
                *vi = c.beta2 * *vi + (1.0 - c.beta2) * gi * gi;
                let m_hat = *mi / correct1;
                let v_hat = *vi / correct2;
                *w -= c.lr * m_hat / (v_hat.sqrt() + c.eps);
            }
            if !p.is_finite() {
                return Err(AutodiffError::NonFinite(name));
            }
        }
        Ok(())
    }
}
