use std::collections::HashMap;

use rand::Rng;

use super::loss::{check_rate, dropout_mask, softmax, KL_FLOOR};
use super::{AutodiffError, Gradients, Tensor};

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

#[derive(Debug)]
enum Op {
    Constant,
    Param(String),
    ParamRow { name: String, row: usize, shape: [usize; 2] },
    MatVec(Var, Var),
    Add(Var, Var),
    Mul(Var, Var),
    Sigmoid(Var),
    Tanh(Var),
    Scale(Var, f64),
    Mask(Var, Vec<f64>),
    Concat(Vec<Var>),
    Slice(Var, usize),
    Sum(Vec<Var>),
    SoftmaxCe { logits: Var, gold: usize, probs: Vec<f64> },
    SoftmaxKl { logits: Var, target: Vec<f64>, probs: Vec<f64> },
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
}

/// Reverse-mode tape. Every operation appends a node; [`Tape::backward`]
/// walks the nodes in reverse and returns gradients for parameter leaves.
#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
    params: HashMap<String, Var>,
    rows: HashMap<(String, usize), Var>,
}

fn shape_err(msg: String) -> AutodiffError {
    AutodiffError::Shape(msg)
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Tensor, op: Op) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    /// Scalar value of a one-element node.
    pub fn scalar(&self, v: Var) -> f64 {
        self.nodes[v.0].value.data()[0]
    }

    fn vec_len(&self, v: Var) -> usize {
        self.nodes[v.0].value.len()
    }

    /// A value that receives no gradient.
    pub fn constant(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Constant)
    }

    /// Registers a whole parameter tensor. Repeated calls with the same name
    /// return the same node.
    pub fn param(&mut self, name: &str, value: &Tensor) -> Var {
        if let Some(&v) = self.params.get(name) {
            return v;
        }
        let v = self.push(value.clone(), Op::Param(name.to_string()));
        self.params.insert(name.to_string(), v);
        v
    }

    /// Registers one row of a matrix parameter (an embedding lookup).
    pub fn param_row(&mut self, name: &str, table: &Tensor, row: usize) -> Result<Var, AutodiffError> {
        let shape = table.shape();
        if shape.len() != 2 || row >= shape[0] {
            return Err(shape_err(format!("row {row} out of table shape {shape:?}")));
        }
        let key = (name.to_string(), row);
        if let Some(&v) = self.rows.get(&key) {
            return Ok(v);
        }
        let op = Op::ParamRow {
            name: name.to_string(),
            row,
            shape: [shape[0], shape[1]],
        };
        let v = self.push(Tensor::vector(table.row(row).to_vec()), op);
        self.rows.insert(key, v);
        Ok(v)
    }

    /// `w · x` for a matrix `w` of shape `[m, n]` and a vector `x` of length `n`.
    pub fn matvec(&mut self, w: Var, x: Var) -> Result<Var, AutodiffError> {
        let wt = self.value(w);
        let xt = self.value(x);
        if wt.shape().len() != 2 || wt.shape()[1] != xt.len() {
            return Err(shape_err(format!(
                "matvec of {:?} with vector of length {}",
                wt.shape(),
                xt.len()
            )));
        }
        let cols = wt.shape()[1];
        let xs = xt.data();
        let out: Vec<f64> = wt
            .data()
            .chunks_exact(cols)
            .map(|row| row.iter().zip(xs).map(|(a, b)| a * b).sum())
            .collect();
        Ok(self.push(Tensor::vector(out), Op::MatVec(w, x)))
    }

    fn zip_with(&mut self, a: Var, b: Var, f: impl Fn(f64, f64) -> f64, op: Op) -> Result<Var, AutodiffError> {
        let (av, bv) = (self.value(a), self.value(b));
        if av.len() != bv.len() {
            return Err(shape_err(format!("elementwise op on lengths {} and {}", av.len(), bv.len())));
        }
        let out = av.data().iter().zip(bv.data()).map(|(x, y)| f(*x, *y)).collect();
        let shape = av.shape().to_vec();
        Ok(self.push(Tensor::new(shape, out)?, op))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var, AutodiffError> {
        self.zip_with(a, b, |x, y| x + y, Op::Add(a, b))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var, AutodiffError> {
        self.zip_with(a, b, |x, y| x * y, Op::Mul(a, b))
    }

    fn map(&mut self, a: Var, f: impl Fn(f64) -> f64, op: Op) -> Var {
        let av = self.value(a);
        let out = av.data().iter().map(|x| f(*x)).collect();
        let t = Tensor::new(av.shape().to_vec(), out).expect("same shape");
        self.push(t, op)
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        self.map(a, sigmoid, Op::Sigmoid(a))
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        self.map(a, f64::tanh, Op::Tanh(a))
    }

    pub fn scale(&mut self, a: Var, factor: f64) -> Var {
        self.map(a, |x| x * factor, Op::Scale(a, factor))
    }

    /// Inverted dropout on `a`; returns `a` untouched when not training or
    /// when `rate` is zero.
    pub fn dropout(&mut self, a: Var, rate: f64, training: bool, rng: &mut impl Rng) -> Result<Var, AutodiffError> {
        check_rate(rate)?;
        if !training || rate == 0.0 {
            return Ok(a);
        }
        let mask = dropout_mask(self.vec_len(a), rate, rng);
        let out = self.value(a).data().iter().zip(&mask).map(|(x, m)| x * m).collect();
        Ok(self.push(Tensor::vector(out), Op::Mask(a, mask)))
    }

    pub fn concat(&mut self, parts: &[Var]) -> Var {
        let out: Vec<f64> = parts
            .iter()
            .flat_map(|p| self.value(*p).data().iter().copied())
            .collect();
        self.push(Tensor::vector(out), Op::Concat(parts.to_vec()))
    }

    pub fn slice(&mut self, a: Var, start: usize, len: usize) -> Result<Var, AutodiffError> {
        let av = self.value(a);
        if start + len > av.len() || len == 0 {
            return Err(shape_err(format!("slice {start}..{} of length {}", start + len, av.len())));
        }
        let out = av.data()[start..start + len].to_vec();
        Ok(self.push(Tensor::vector(out), Op::Slice(a, start)))
    }

    /// Elementwise sum of equally-shaped values.
    pub fn sum(&mut self, parts: &[Var]) -> Result<Var, AutodiffError> {
        let first = parts
            .first()
            .ok_or_else(|| shape_err("sum of zero terms".into()))?;
        let mut acc = self.value(*first).clone();
        for p in &parts[1..] {
            let pv = self.value(*p);
            if pv.len() != acc.len() {
                return Err(shape_err(format!("sum of lengths {} and {}", acc.len(), pv.len())));
            }
            for (a, b) in acc.data_mut().iter_mut().zip(pv.data()) {
                *a += b;
            }
        }
        Ok(self.push(acc, Op::Sum(parts.to_vec())))
    }

    /// Scalar `-ln softmax(logits)[gold]`.
    pub fn softmax_cross_entropy(&mut self, logits: Var, gold: usize) -> Result<Var, AutodiffError> {
        let (loss, probs) = super::softmax_cross_entropy(self.value(logits).data(), gold)?;
        Ok(self.push(Tensor::vector(vec![loss]), Op::SoftmaxCe { logits, gold, probs }))
    }

    /// Scalar `KL(target ‖ softmax(logits))`; the target is a constant.
    pub fn softmax_kl(&mut self, logits: Var, target: &[f64]) -> Result<Var, AutodiffError> {
        let probs = softmax(self.value(logits).data());
        if probs.len() != target.len() {
            return Err(AutodiffError::LengthMismatch {
                left: target.len(),
                right: probs.len(),
            });
        }
        let loss = target
            .iter()
            .zip(&probs)
            .filter(|(t, _)| **t > 0.0)
            .map(|(t, p)| t * (t / p.max(KL_FLOOR)).ln())
            .sum();
        Ok(self.push(
            Tensor::vector(vec![loss]),
            Op::SoftmaxKl {
                logits,
                target: target.to_vec(),
                probs,
            },
        ))
    }

    /// Gradients of the scalar `loss` with respect to every parameter leaf
    /// that contributed to it.
    pub fn backward(&self, loss: Var) -> Result<Gradients, AutodiffError> {
        if self.value(loss).len() != 1 {
            return Err(shape_err("backward needs a scalar loss".into()));
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; loss.0 + 1];
        grads[loss.0] = Some(vec![1.0]);
        let mut out = Gradients::new();

        fn acc(grads: &mut [Option<Vec<f64>>], v: Var, len: usize, f: impl Fn(&mut [f64])) {
            let slot = grads[v.0].get_or_insert_with(|| vec![0.0; len]);
            f(slot);
        }

        for idx in (0..=loss.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            let node = &self.nodes[idx];
            match &node.op {
                Op::Constant => {}
                Op::Param(name) => {
                    let dst = out.entry(name, node.value.shape());
                    for (d, s) in dst.data_mut().iter_mut().zip(&g) {
                        *d += s;
                    }
                }
                Op::ParamRow { name, row, shape } => {
                    let dst = out.entry(name, shape);
                    for (d, s) in dst.row_mut(*row).iter_mut().zip(&g) {
                        *d += s;
                    }
                }
                Op::MatVec(w, x) => {
                    let wt = self.value(*w);
                    let xt = self.value(*x);
                    let cols = xt.len();
                    acc(&mut grads, *w, wt.len(), |gw| {
                        for (r, gr) in g.iter().enumerate() {
                            if *gr == 0.0 {
                                continue;
                            }
                            let row = &mut gw[r * cols..(r + 1) * cols];
                            for (dst, xv) in row.iter_mut().zip(xt.data()) {
                                *dst += gr * xv;
                            }
                        }
                    });
                    acc(&mut grads, *x, cols, |gx| {
                        for (r, gr) in g.iter().enumerate() {
                            let row = wt.row(r);
                            for (dst, wv) in gx.iter_mut().zip(row) {
                                *dst += gr * wv;
                            }
                        }
                    });
                }
                Op::Add(a, b) => {
                    for v in [a, b] {
                        acc(&mut grads, *v, g.len(), |ga| {
                            for (d, s) in ga.iter_mut().zip(&g) {
                                *d += s;
                            }
                        });
                    }
                }
                Op::Mul(a, b) => {
                    let (av, bv) = (self.value(*a).data(), self.value(*b).data());
                    acc(&mut grads, *a, g.len(), |ga| {
                        for i in 0..g.len() {
                            ga[i] += g[i] * bv[i];
                        }
                    });
                    acc(&mut grads, *b, g.len(), |gb| {
                        for i in 0..g.len() {
                            gb[i] += g[i] * av[i];
                        }
                    });
                }
                Op::Sigmoid(a) => {
                    let y = node.value.data();
                    acc(&mut grads, *a, g.len(), |ga| {
                        for i in 0..g.len() {
                            ga[i] += g[i] * y[i] * (1.0 - y[i]);
                        }
                    });
                }
                Op::Tanh(a) => {
                    let y = node.value.data();
                    acc(&mut grads, *a, g.len(), |ga| {
                        for i in 0..g.len() {
                            ga[i] += g[i] * (1.0 - y[i] * y[i]);
                        }
                    });
                }
                Op::Scale(a, factor) => {
                    acc(&mut grads, *a, g.len(), |ga| {
                        for (d, s) in ga.iter_mut().zip(&g) {
                            *d += s * factor;
                        }
                    });
                }
                Op::Mask(a, mask) => {
                    acc(&mut grads, *a, g.len(), |ga| {
                        for i in 0..g.len() {
                            ga[i] += g[i] * mask[i];
                        }
                    });
                }
                Op::Concat(parts) => {
                    let mut offset = 0;
                    for p in parts {
                        let len = self.vec_len(*p);
                        let piece = &g[offset..offset + len];
                        acc(&mut grads, *p, len, |gp| {
                            for (d, s) in gp.iter_mut().zip(piece) {
                                *d += s;
                            }
                        });
                        offset += len;
                    }
                }
                Op::Slice(a, start) => {
                    let len = self.vec_len(*a);
                    acc(&mut grads, *a, len, |ga| {
                        for (d, s) in ga[*start..*start + g.len()].iter_mut().zip(&g) {
                            *d += s;
                        }
                    });
                }
                Op::Sum(parts) => {
                    for p in parts {
                        acc(&mut grads, *p, g.len(), |gp| {
                            for (d, s) in gp.iter_mut().zip(&g) {
                                *d += s;
                            }
                        });
                    }
                }
                Op::SoftmaxCe { logits, gold, probs } => {
                    let up = g[0];
                    acc(&mut grads, *logits, probs.len(), |gl| {
                        for (j, p) in probs.iter().enumerate() {
                            let onehot = if j == *gold { 1.0 } else { 0.0 };
                            gl[j] += up * (p - onehot);
                        }
                    });
                }
                Op::SoftmaxKl { logits, target, probs } => {
                    let up = g[0];
                    let mass: f64 = target.iter().sum();
                    acc(&mut grads, *logits, probs.len(), |gl| {
                        for j in 0..probs.len() {
                            gl[j] += up * (mass * probs[j] - target[j]);
                        }
                    });
                }
            }
        }
        Ok(out)
    }
}
