//! Dense feed-forward classifier with exact reverse-mode gradients.
//!
//! Hidden layers use ReLU (the `Tanh` variant exists only for contrast
//! experiments); the output layer is affine and produces the scores that feed
//! softmax. Gradients with respect to inputs and parameters come from one
//! recorded forward pass and a backward pass per cotangent.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum NetError {
    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("label {label} out of range for {classes} classes")]
    LabelOutOfRange { label: usize, classes: usize },
    #[error("invalid architecture: {0}")]
    Shape(String),
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Activation {
    Relu,
    Tanh,
}

impl Activation {
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Tanh => z.tanh(),
        }
    }

    // ReLU derivative at exactly 0 is taken to be 0.
    fn derivative(self, z: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => {
                let t = z.tanh();
                1.0 - t * t
            }
        }
    }

    pub fn is_piecewise_linear(self) -> bool {
        matches!(self, Activation::Relu)
    }
}

/// Weights and biases of a dense classifier with dims `[n, h_1, ..., h_L, C]`.
///
/// `weights[l]` is row-major with shape `layer_dims[l+1] x layer_dims[l]`.
/// The same type doubles as a gradient container.
#[derive(Debug, Clone, PartialEq)]
pub struct NetParams {
    pub layer_dims: Vec<usize>,
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
    pub activation: Activation,
}

impl NetParams {
    pub fn zeros(layer_dims: &[usize], activation: Activation) -> Result<Self, NetError> {
        if layer_dims.len() < 2 || layer_dims.contains(&0) {
            return Err(NetError::Shape(format!(
                "need at least input and output dims, all positive: {layer_dims:?}"
            )));
        }
        let weights = layer_dims
            .windows(2)
            .map(|w| vec![0.0; w[0] * w[1]])
            .collect();
        let biases = layer_dims[1..].iter().map(|&m| vec![0.0; m]).collect();
        Ok(NetParams {
            layer_dims: layer_dims.to_vec(),
            weights,
            biases,
            activation,
        })
    }

    /// Uniform `±1/sqrt(fan_in)` initialization for weights and biases.
    pub fn init(
        layer_dims: &[usize],
        activation: Activation,
        rng: &mut impl rand::Rng,
    ) -> Result<Self, NetError> {
        let mut p = Self::zeros(layer_dims, activation)?;
        for l in 0..p.num_layers() {
            let bound = 1.0 / (p.layer_dims[l] as f64).sqrt();
            for w in &mut p.weights[l] {
                *w = rng.random_range(-bound..bound);
            }
            for b in &mut p.biases[l] {
                *b = rng.random_range(-bound..bound);
            }
        }
        Ok(p)
    }

    pub fn zeros_like(&self) -> Self {
        NetParams {
            layer_dims: self.layer_dims.clone(),
            weights: self.weights.iter().map(|w| vec![0.0; w.len()]).collect(),
            biases: self.biases.iter().map(|b| vec![0.0; b.len()]).collect(),
            activation: self.activation,
        }
    }

    pub fn num_layers(&self) -> usize {
        self.layer_dims.len() - 1
    }

    pub fn input_dim(&self) -> usize {
        self.layer_dims[0]
    }

    pub fn classes(&self) -> usize {
        *self.layer_dims.last().expect("non-empty dims")
    }

    /// Total parameter count `d`.
    pub fn num_params(&self) -> usize {
        self.layer_dims
            .windows(2)
            .map(|w| w[0] * w[1] + w[1])
            .sum()
    }

    /// Layer by layer: weights then biases.
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_params());
        for (w, b) in self.weights.iter().zip(&self.biases) {
            out.extend_from_slice(w);
            out.extend_from_slice(b);
        }
        out
    }

    pub fn with_flat(&self, flat: &[f64]) -> Result<Self, NetError> {
        if flat.len() != self.num_params() {
            return Err(NetError::DimensionMismatch {
                expected: self.num_params(),
                found: flat.len(),
            });
        }
        let mut p = self.zeros_like();
        let mut at = 0;
        for (w, b) in p.weights.iter_mut().zip(p.biases.iter_mut()) {
            let (nw, nb) = (w.len(), b.len());
            w.copy_from_slice(&flat[at..at + nw]);
            at += nw;
            b.copy_from_slice(&flat[at..at + nb]);
            at += nb;
        }
        Ok(p)
    }

    /// `self += alpha * other`, shapes assumed equal.
    pub fn axpy(&mut self, alpha: f64, other: &NetParams) {
        for (w, ow) in self.weights.iter_mut().zip(&other.weights) {
            w.iter_mut().zip(ow).for_each(|(a, b)| *a += alpha * b);
        }
        for (b, ob) in self.biases.iter_mut().zip(&other.biases) {
            b.iter_mut().zip(ob).for_each(|(a, o)| *a += alpha * o);
        }
    }

    /// Checks shape consistency and finiteness.
    pub fn validate(&self) -> Result<(), NetError> {
        if self.layer_dims.len() < 2 || self.layer_dims.contains(&0) {
            return Err(NetError::Shape(format!("bad dims {:?}", self.layer_dims)));
        }
        if self.weights.len() != self.num_layers() || self.biases.len() != self.num_layers() {
            return Err(NetError::Shape("layer count does not match dims".into()));
        }
        for (l, dims) in self.layer_dims.windows(2).enumerate() {
            if self.weights[l].len() != dims[0] * dims[1] || self.biases[l].len() != dims[1] {
                return Err(NetError::Shape(format!("layer {l} has wrong shape")));
            }
        }
        let finite = self
            .weights
            .iter()
            .chain(&self.biases)
            .all(|v| v.iter().all(|x| x.is_finite()));
        if !finite {
            return Err(NetError::NonFinite("parameters"));
        }
        Ok(())
    }

    fn check_input(&self, x: &[f64]) -> Result<(), NetError> {
        if x.len() != self.input_dim() {
            return Err(NetError::DimensionMismatch {
                expected: self.input_dim(),
                found: x.len(),
            });
        }
        if !x.iter().all(|v| v.is_finite()) {
            return Err(NetError::NonFinite("input"));
        }
        Ok(())
    }

    fn check_label(&self, y: usize) -> Result<(), NetError> {
        if y >= self.classes() {
            return Err(NetError::LabelOutOfRange {
                label: y,
                classes: self.classes(),
            });
        }
        Ok(())
    }
}

// Four partial sums so the loop vectorizes; the order is fixed, so results are deterministic.
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0f64; 4];
    let (ca, cb) = (a.chunks_exact(4), b.chunks_exact(4));
    let tail: f64 = ca.remainder().iter().zip(cb.remainder()).map(|(p, q)| p * q).sum();
    for (x, y) in ca.zip(cb) {
        for k in 0..4 {
            acc[k] += x[k] * y[k];
        }
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// Forward pass with every layer input and pre-activation kept for backprop.
#[derive(Debug, Clone)]
pub struct Tape {
    // inputs[l] feeds layer l; inputs[0] = x
    inputs: Vec<Vec<f64>>,
    // pre-activations of hidden layers
    pre: Vec<Vec<f64>>,
    scores: Vec<f64>,
}

impl Tape {
    pub fn record(params: &NetParams, x: &[f64]) -> Result<Tape, NetError> {
        params.check_input(x)?;
        let layers = params.num_layers();
        let mut inputs = Vec::with_capacity(layers);
        let mut pre = Vec::with_capacity(layers - 1);
        let mut a = x.to_vec();
        for l in 0..layers {
            let (n_in, n_out) = (params.layer_dims[l], params.layer_dims[l + 1]);
            let w = &params.weights[l];
            let z: Vec<f64> = (0..n_out)
                .map(|j| {
                    let row = &w[j * n_in..(j + 1) * n_in];
                    params.biases[l][j] + dot(row, &a)
                })
                .collect();
            inputs.push(a);
            if l + 1 < layers {
                a = z.iter().map(|&v| params.activation.apply(v)).collect();
                pre.push(z);
            } else {
                a = z;
            }
        }
        Ok(Tape {
            inputs,
            pre,
            scores: a,
        })
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    /// Hidden pre-activations, layer by layer.
    pub fn pre_activations(&self) -> &[Vec<f64>] {
        &self.pre
    }

    /// Pull a score-space cotangent back to the input (and optionally to the parameters).
    pub fn backward(
        &self,
        params: &NetParams,
        cotangent: &[f64],
        want_params: bool,
    ) -> (Vec<f64>, Option<NetParams>) {
        let mut grads = want_params.then(|| params.zeros_like());
        let mut delta = cotangent.to_vec();
        for l in (0..params.num_layers()).rev() {
            let (n_in, n_out) = (params.layer_dims[l], params.layer_dims[l + 1]);
            let w = &params.weights[l];
            if let Some(g) = grads.as_mut() {
                let a = &self.inputs[l];
                for j in 0..n_out {
                    let row = &mut g.weights[l][j * n_in..(j + 1) * n_in];
                    row.iter_mut().zip(a).for_each(|(r, &v)| *r = delta[j] * v);
                }
                g.biases[l].copy_from_slice(&delta);
            }
            let mut prev = vec![0.0; n_in];
            for j in 0..n_out {
                if delta[j] == 0.0 {
                    continue;
                }
                let row = &w[j * n_in..(j + 1) * n_in];
                prev.iter_mut().zip(row).for_each(|(p, &r)| *p += delta[j] * r);
            }
            if l > 0 {
                prev.iter_mut()
                    .zip(&self.pre[l - 1])
                    .for_each(|(p, &z)| *p *= params.activation.derivative(z));
            }
            delta = prev;
        }
        (delta, grads)
    }

    /// Input gradients for several cotangents in one sweep over the weights.
    pub fn input_gradients(&self, params: &NetParams, cotangents: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let mut deltas: Vec<Vec<f64>> = cotangents.to_vec();
        for l in (0..params.num_layers()).rev() {
            let (n_in, n_out) = (params.layer_dims[l], params.layer_dims[l + 1]);
            let w = &params.weights[l];
            let mut prev = vec![vec![0.0; n_in]; deltas.len()];
            for j in 0..n_out {
                let row = &w[j * n_in..(j + 1) * n_in];
                for (p, d) in prev.iter_mut().zip(&deltas) {
                    if d[j] != 0.0 {
                        p.iter_mut().zip(row).for_each(|(p, &r)| *p += d[j] * r);
                    }
                }
            }
            if l > 0 {
                for p in prev.iter_mut() {
                    p.iter_mut()
                        .zip(&self.pre[l - 1])
                        .for_each(|(p, &z)| *p *= params.activation.derivative(z));
                }
            }
            deltas = prev;
        }
        deltas
    }

    /// Cotangent at the output of every layer, front to back.
    fn layer_deltas(&self, params: &NetParams, cotangent: Vec<f64>) -> Vec<Vec<f64>> {
        let layers = params.num_layers();
        let mut out = vec![Vec::new(); layers];
        let mut delta = cotangent;
        for l in (1..layers).rev() {
            let (n_in, n_out) = (params.layer_dims[l], params.layer_dims[l + 1]);
            let w = &params.weights[l];
            let mut prev = vec![0.0; n_in];
            for j in 0..n_out {
                if delta[j] == 0.0 {
                    continue;
                }
                let row = &w[j * n_in..(j + 1) * n_in];
                prev.iter_mut().zip(row).for_each(|(p, &r)| *p += delta[j] * r);
            }
            prev.iter_mut()
                .zip(&self.pre[l - 1])
                .for_each(|(p, &z)| *p *= params.activation.derivative(z));
            out[l] = std::mem::replace(&mut delta, prev);
        }
        out[0] = delta;
        out
    }
}

pub fn forward(params: &NetParams, x: &[f64]) -> Result<Vec<f64>, NetError> {
    Ok(Tape::record(params, x)?.scores)
}

/// Stable log-softmax (max subtraction).
pub fn log_softmax(scores: &[f64]) -> Result<Vec<f64>, NetError> {
    if !scores.iter().all(|v| v.is_finite()) {
        return Err(NetError::NonFinite("scores"));
    }
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + scores.iter().map(|s| (s - max).exp()).sum::<f64>().ln();
    Ok(scores.iter().map(|s| s - lse).collect())
}

pub fn softmax(scores: &[f64]) -> Result<Vec<f64>, NetError> {
    Ok(log_softmax(scores)?.into_iter().map(f64::exp).collect())
}

/// Row `i` is the input gradient of `log p_i`; the rows span the distribution at `x`.
#[derive(Debug, Clone, PartialEq)]
pub struct InputJacobian {
    pub rows: Vec<Vec<f64>>,
    pub probs: Vec<f64>,
    pub log_probs: Vec<f64>,
}

impl InputJacobian {
    pub fn predicted(&self) -> usize {
        argmax(&self.probs)
    }

    pub fn max_prob(&self) -> f64 {
        self.probs.iter().copied().fold(0.0, f64::max)
    }
}

pub fn argmax(v: &[f64]) -> usize {
    v.iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |best, (i, &x)| if x > best.1 { (i, x) } else { best })
        .0
}

// d log p_i / d s = e_i - p
fn log_prob_cotangent(probs: &[f64], i: usize) -> Vec<f64> {
    let mut c: Vec<f64> = probs.iter().map(|p| -p).collect();
    c[i] += 1.0;
    c
}

pub fn input_jacobian(params: &NetParams, x: &[f64]) -> Result<InputJacobian, NetError> {
    let tape = Tape::record(params, x)?;
    let log_probs = log_softmax(tape.scores())?;
    let probs: Vec<f64> = log_probs.iter().map(|v| v.exp()).collect();
    let cots: Vec<Vec<f64>> = (0..params.classes())
        .map(|i| log_prob_cotangent(&probs, i))
        .collect();
    let rows = tape.input_gradients(params, &cots);
    Ok(InputJacobian {
        rows,
        probs,
        log_probs,
    })
}

/// Gradient of the cross-entropy loss `-log p_y` with respect to every parameter.
pub fn param_gradient(params: &NetParams, x: &[f64], y: usize) -> Result<NetParams, NetError> {
    params.check_label(y)?;
    let tape = Tape::record(params, x)?;
    let mut cot = softmax(tape.scores())?;
    cot[y] -= 1.0;
    Ok(tape.backward(params, &cot, true).1.expect("requested"))
}

/// Loss and gradient from one forward pass.
pub fn loss_and_gradient(
    params: &NetParams,
    x: &[f64],
    y: usize,
) -> Result<(f64, NetParams), NetError> {
    params.check_label(y)?;
    let tape = Tape::record(params, x)?;
    let log_probs = log_softmax(tape.scores())?;
    let mut cot: Vec<f64> = log_probs.iter().map(|v| v.exp()).collect();
    cot[y] -= 1.0;
    let grad = tape.backward(params, &cot, true).1.expect("requested");
    Ok((-log_probs[y], grad))
}

/// Summed cross-entropy loss and gradient over a minibatch.
///
/// Each weight row is accumulated across the whole batch before moving on,
/// which keeps the row in cache; the summation order is fixed.
pub fn batch_gradient(
    params: &NetParams,
    xs: &[&[f64]],
    ys: &[usize],
) -> Result<(f64, NetParams), NetError> {
    assert_eq!(xs.len(), ys.len(), "one label per input");
    let mut loss = 0.0;
    let mut tapes = Vec::with_capacity(xs.len());
    let mut deltas = Vec::with_capacity(xs.len());
    for (&x, &y) in xs.iter().zip(ys) {
        params.check_label(y)?;
        let tape = Tape::record(params, x)?;
        let log_probs = log_softmax(tape.scores())?;
        let mut cot: Vec<f64> = log_probs.iter().map(|v| v.exp()).collect();
        cot[y] -= 1.0;
        loss -= log_probs[y];
        deltas.push(tape.layer_deltas(params, cot));
        tapes.push(tape);
    }
    let mut grad = params.zeros_like();
    for l in 0..params.num_layers() {
        let n_in = params.layer_dims[l];
        for j in 0..params.layer_dims[l + 1] {
            let row = &mut grad.weights[l][j * n_in..(j + 1) * n_in];
            let mut bias = 0.0;
            for (tape, d) in tapes.iter().zip(&deltas) {
                let dj = d[l][j];
                if dj != 0.0 {
                    row.iter_mut().zip(&tape.inputs[l]).for_each(|(r, &v)| *r += dj * v);
                    bias += dj;
                }
            }
            grad.biases[l][j] = bias;
        }
    }
    Ok((loss, grad))
}

/// Parameter gradients of every `log p_i`, with the probabilities.
pub fn param_log_jacobian(
    params: &NetParams,
    x: &[f64],
) -> Result<(Vec<NetParams>, Vec<f64>), NetError> {
    let tape = Tape::record(params, x)?;
    let probs = softmax(tape.scores())?;
    let grads = (0..params.classes())
        .map(|i| {
            tape.backward(params, &log_prob_cotangent(&probs, i), true)
                .1
                .expect("requested")
        })
        .collect();
    Ok((grads, probs))
}

/// Activation pattern (signs of hidden pre-activations) at `x`.
pub fn activation_pattern(params: &NetParams, x: &[f64]) -> Result<Vec<bool>, NetError> {
    let tape = Tape::record(params, x)?;
    Ok(tape.pre.iter().flatten().map(|&z| z > 0.0).collect())
}
