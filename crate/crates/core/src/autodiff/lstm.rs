use rand::Rng;

use super::{AutodiffError, ModelParameters, Tape, Tensor, Var};

/// Shapes of one directional LSTM: a `[4h, d + h]` gate matrix acting on
/// `[x; h_prev]` and a `[4h]` bias, gates ordered input, forget, candidate, output.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmSpec {
    pub prefix: String,
    pub input_dim: usize,
    pub hidden: usize,
}

impl LstmSpec {
    pub fn new(prefix: impl Into<String>, input_dim: usize, hidden: usize) -> Self {
        LstmSpec {
            prefix: prefix.into(),
            input_dim,
            hidden,
        }
    }

    pub fn weight_name(&self) -> String {
        format!("{}.weight", self.prefix)
    }

    pub fn bias_name(&self) -> String {
        format!("{}.bias", self.prefix)
    }

    /// Uniform(±1/√h) weights, zero biases except a forget-gate bias of 1.
    pub fn init(&self, params: &mut ModelParameters, rng: &mut impl Rng) {
        let h = self.hidden;
        let cols = self.input_dim + h;
        let bound = 1.0 / (h as f64).sqrt();
        let w = (0..4 * h * cols)
            .map(|_| rng.random_range(-bound..bound))
            .collect();
        let mut b = vec![0.0; 4 * h];
        b[h..2 * h].fill(1.0);
        params.insert(self.weight_name(), Tensor::matrix(4 * h, cols, w).unwrap());
        params.insert(self.bias_name(), Tensor::vector(b));
    }

    /// Registers this LSTM's parameters on `tape`.
    pub fn bind(&self, tape: &mut Tape, params: &ModelParameters) -> Result<LstmParams, AutodiffError> {
        let w = params.get(&self.weight_name())?;
        let b = params.get(&self.bias_name())?;
        let h = self.hidden;
        if w.shape() != [4 * h, self.input_dim + h] || b.shape() != [4 * h] {
            return Err(AutodiffError::Shape(format!(
                "{}: weight {:?} / bias {:?} do not match input {} hidden {}",
                self.prefix,
                w.shape(),
                b.shape(),
                self.input_dim,
                h
            )));
        }
        Ok(LstmParams {
            weight: tape.param(&self.weight_name(), w),
            bias: tape.param(&self.bias_name(), b),
            input_dim: self.input_dim,
            hidden: h,
        })
    }
}

/// LSTM parameters bound to a tape.
#[derive(Debug, Clone, Copy)]
pub struct LstmParams {
    pub weight: Var,
    pub bias: Var,
    pub input_dim: usize,
    pub hidden: usize,
}

/// One gated recurrence step; returns `(h, c)`.
pub fn lstm_cell(
    tape: &mut Tape,
    x: Var,
    h_prev: Var,
    c_prev: Var,
    p: &LstmParams,
) -> Result<(Var, Var), AutodiffError> {
    let h = p.hidden;
    if tape.value(x).len() != p.input_dim {
        return Err(AutodiffError::Shape(format!(
            "input of length {} for an LSTM expecting {}",
            tape.value(x).len(),
            p.input_dim
        )));
    }
    if tape.value(h_prev).len() != h || tape.value(c_prev).len() != h {
        return Err(AutodiffError::Shape(format!("recurrent state must have length {h}")));
    }
    let joined = tape.concat(&[x, h_prev]);
    let pre = tape.matvec(p.weight, joined)?;
    let z = tape.add(pre, p.bias)?;
    let i = tape.slice(z, 0, h)?;
    let i = tape.sigmoid(i);
    let f = tape.slice(z, h, h)?;
    let f = tape.sigmoid(f);
    let g = tape.slice(z, 2 * h, h)?;
    let g = tape.tanh(g);
    let o = tape.slice(z, 3 * h, h)?;
    let o = tape.sigmoid(o);
    let keep = tape.mul(f, c_prev)?;
    let write = tape.mul(i, g)?;
    let c = tape.add(keep, write)?;
    let squashed = tape.tanh(c);
    let h_new = tape.mul(o, squashed)?;
    Ok((h_new, c))
}

/// Per-token hidden states of both directions.
#[derive(Debug, Clone)]
pub struct EncoderState {
    pub forward: Vec<Var>,
    pub backward: Vec<Var>,
}

impl EncoderState {
    pub fn len(&self) -> usize {
        self.forward.len()
    }

    pub fn is_empty(&self) -> bool {
        self.forward.is_empty()
    }

    /// `[forward_i; backward_i]`, length `2h`.
    pub fn token(&self, tape: &mut Tape, i: usize) -> Var {
        tape.concat(&[self.forward[i], self.backward[i]])
    }

    /// The two `n × h` hidden-state matrices.
    pub fn to_tensors(&self, tape: &Tape) -> (Tensor, Tensor) {
        let stack = |vars: &[Var]| {
            let h = tape.value(vars[0]).len();
            let data = vars.iter().flat_map(|v| tape.value(*v).data().to_vec()).collect();
            Tensor::matrix(vars.len(), h, data).unwrap()
        };
        (stack(&self.forward), stack(&self.backward))
    }
}

/// Runs `fwd` left to right and `bwd` right to left from zero states.
pub fn bi_encode(
    tape: &mut Tape,
    inputs: &[Var],
    fwd: &LstmParams,
    bwd: &LstmParams,
) -> Result<EncoderState, AutodiffError> {
    if inputs.is_empty() {
        return Err(AutodiffError::EmptySequence);
    }
    let run = |tape: &mut Tape, p: &LstmParams, order: &mut dyn Iterator<Item = usize>| {
        let mut out = vec![None; inputs.len()];
        let mut h = tape.constant(Tensor::zeros(&[p.hidden]));
        let mut c = tape.constant(Tensor::zeros(&[p.hidden]));
        for i in order {
            let (h2, c2) = lstm_cell(tape, inputs[i], h, c, p)?;
            h = h2;
            c = c2;
            out[i] = Some(h);
        }
        Ok::<_, AutodiffError>(out.into_iter().map(Option::unwrap).collect::<Vec<Var>>())
    };
    let forward = run(tape, fwd, &mut (0..inputs.len()))?;
    let backward = run(tape, bwd, &mut (0..inputs.len()).rev())?;
    Ok(EncoderState { forward, backward })
}
