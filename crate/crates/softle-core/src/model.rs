//! From-scratch differentiable softmax classifiers with exact gradients
//! for cross-entropy against arbitrary soft targets, plus SGD and Adam.
//!
//! Two architectures: a linear map and a one-hidden-layer tanh MLP. All
//! math goes through `libm` so results are identical with and without
//! `std`.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::config::{Arch, OptimizerKind};
use crate::error::Error;
use crate::Result;

/// Floor applied to probabilities inside logarithms.
pub const PROB_FLOOR: f64 = 1e-12;

/// One dense layer, row-major `rows x cols` weights plus a bias per row.
/// Also reused as the value holder for gradients and Adam moments.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub rows: usize,
    pub cols: usize,
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

impl Layer {
    fn zeros(rows: usize, cols: usize) -> Layer {
        Layer { rows, cols, weights: vec![0.0; rows * cols], biases: vec![0.0; rows] }
    }

    fn matvec(&self, x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        for r in 0..self.rows {
            let row = &self.weights[r * self.cols..(r + 1) * self.cols];
            let mut acc = self.biases[r];
            for (w, xi) in row.iter().zip(x) {
                acc += w * xi;
            }
            out.push(acc);
        }
    }

    fn all_finite(&self) -> bool {
        self.weights.iter().chain(self.biases.iter()).all(|v| v.is_finite())
    }
}

/// Weights and biases of a softmax classifier (teacher or student).
#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierParams {
    pub arch: Arch,
    pub num_inputs: usize,
    pub num_outputs: usize,
    pub layers: Vec<Layer>,
}

impl ClassifierParams {
    /// Fresh parameters with uniform init in `[-1/sqrt(fan_in), 1/sqrt(fan_in)]`.
    pub fn init(arch: Arch, num_inputs: usize, num_outputs: usize, rng: &mut ChaCha8Rng) -> ClassifierParams {
        let shapes: Vec<(usize, usize)> = match arch {
            Arch::Linear => vec![(num_outputs, num_inputs)],
            Arch::Mlp { hidden } => vec![(hidden, num_inputs), (num_outputs, hidden)],
        };
        let layers = shapes
            .into_iter()
            .map(|(rows, cols)| {
                let bound = 1.0 / libm::sqrt(cols as f64);
                let mut layer = Layer::zeros(rows, cols);
                for w in layer.weights.iter_mut() {
                    *w = rng.gen_range(-bound..=bound);
                }
                for b in layer.biases.iter_mut() {
                    *b = rng.gen_range(-bound..=bound);
                }
                layer
            })
            .collect();
        ClassifierParams { arch, num_inputs, num_outputs, layers }
    }

    pub fn all_finite(&self) -> bool {
        self.layers.iter().all(Layer::all_finite)
    }

    /// Gradient/moment holder with the same shapes, all zero.
    pub fn zeros_like(&self) -> Gradients {
        Gradients {
            layers: self.layers.iter().map(|l| Layer::zeros(l.rows, l.cols)).collect(),
        }
    }
}

/// Cached forward pass: logits, softmax probabilities, and the hidden
/// activation needed for backprop.
#[derive(Debug, Clone)]
pub struct ForwardResult {
    pub logits: Vec<f64>,
    pub probs: Vec<f64>,
    pub hidden: Option<Vec<f64>>,
}

/// Numerically stable softmax (shifts by the max logit).
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = logits.iter().map(|z| libm::exp(z - max)).collect();
    let sum: f64 = out.iter().sum();
    for p in out.iter_mut() {
        *p /= sum;
    }
    out
}

pub fn forward(params: &ClassifierParams, x: &[f64]) -> Result<ForwardResult> {
    if x.len() != params.num_inputs {
        return Err(Error::ShapeMismatch {
            context: "forward input",
            expected: params.num_inputs,
            actual: x.len(),
        });
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite { context: "forward input" });
    }
    let mut logits = Vec::new();
    let hidden = match params.arch {
        Arch::Linear => {
            params.layers[0].matvec(x, &mut logits);
            None
        }
        Arch::Mlp { .. } => {
            let mut pre = Vec::new();
            params.layers[0].matvec(x, &mut pre);
            let h: Vec<f64> = pre.iter().map(|z| libm::tanh(*z)).collect();
            params.layers[1].matvec(&h, &mut logits);
            Some(h)
        }
    };
    let probs = softmax(&logits);
    Ok(ForwardResult { logits, probs, hidden })
}

/// `-sum_j y_j ln p_j`, with probabilities floored at [`PROB_FLOOR`].
pub fn cross_entropy(p: &[f64], y: &[f64]) -> Result<f64> {
    if p.len() != y.len() {
        return Err(Error::ShapeMismatch {
            context: "cross_entropy target",
            expected: p.len(),
            actual: y.len(),
        });
    }
    let mut loss = 0.0;
    for (pj, yj) in p.iter().zip(y) {
        if *yj != 0.0 {
            loss -= yj * libm::log(pj.max(PROB_FLOOR));
        }
    }
    Ok(loss)
}

/// Gradients of the loss with respect to every parameter, same shapes as
/// the model's layers.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<Layer>,
}

impl Gradients {
    /// `self += scale * other`.
    pub fn accumulate(&mut self, other: &Gradients, scale: f64) {
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            for (w, g) in a.weights.iter_mut().zip(&b.weights) {
                *w += scale * g;
            }
            for (w, g) in a.biases.iter_mut().zip(&b.biases) {
                *w += scale * g;
            }
        }
    }

    pub fn scale(&mut self, scale: f64) {
        for l in self.layers.iter_mut() {
            for w in l.weights.iter_mut() {
                *w *= scale;
            }
            for b in l.biases.iter_mut() {
                *b *= scale;
            }
        }
    }

    pub fn all_finite(&self) -> bool {
        self.layers.iter().all(Layer::all_finite)
    }
}

/// Backprop from a precomputed gradient at the logits. Shared by plain
/// cross-entropy training (`g = p - y`) and the product-of-experts loss,
/// where the softmax is taken over combined logits.
pub(crate) fn backprop_from_logit_grad(
    params: &ClassifierParams,
    x: &[f64],
    fwd: &ForwardResult,
    logit_grad: &[f64],
) -> Gradients {
    let mut grads = params.zeros_like();
    match params.arch {
        Arch::Linear => {
            fill_layer_grad(&mut grads.layers[0], logit_grad, x);
        }
        Arch::Mlp { .. } => {
            let h = fwd.hidden.as_ref().expect("mlp forward caches hidden activation");
            fill_layer_grad(&mut grads.layers[1], logit_grad, h);
            // d/dh = W2^T g, then through tanh: dz = dh * (1 - h^2)
            let l2 = &params.layers[1];
            let mut dz1 = vec![0.0; h.len()];
            for r in 0..l2.rows {
                let g = logit_grad[r];
                let row = &l2.weights[r * l2.cols..(r + 1) * l2.cols];
                for (dz, w) in dz1.iter_mut().zip(row) {
                    *dz += w * g;
                }
            }
            for (dz, hj) in dz1.iter_mut().zip(h) {
                *dz *= 1.0 - hj * hj;
            }
            fill_layer_grad(&mut grads.layers[0], &dz1, x);
        }
    }
    grads
}

fn fill_layer_grad(layer: &mut Layer, out_grad: &[f64], input: &[f64]) {
    for r in 0..layer.rows {
        let g = out_grad[r];
        let row = &mut layer.weights[r * layer.cols..(r + 1) * layer.cols];
        for (w, xi) in row.iter_mut().zip(input) {
            *w = g * xi;
        }
        layer.biases[r] = g;
    }
}

/// Exact gradient of `cross_entropy(softmax(model(x)), y)`; the logit-layer
/// gradient is `p - y`.
pub fn backward(params: &ClassifierParams, x: &[f64], y: &[f64]) -> Result<Gradients> {
    let fwd = forward(params, x)?;
    if y.len() != params.num_outputs {
        return Err(Error::ShapeMismatch {
            context: "backward target",
            expected: params.num_outputs,
            actual: y.len(),
        });
    }
    let logit_grad: Vec<f64> = fwd.probs.iter().zip(y).map(|(p, yj)| p - yj).collect();
    Ok(backprop_from_logit_grad(params, x, &fwd, &logit_grad))
}

const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

/// SGD or Adam (beta1=0.9, beta2=0.999, eps=1e-8) over a parameter set.
#[derive(Debug, Clone)]
pub struct Optimizer {
    kind: OptimizerKind,
    adam: Option<AdamState>,
}

#[derive(Debug, Clone)]
struct AdamState {
    m: Gradients,
    v: Gradients,
    t: u64,
}

impl Optimizer {
    pub fn new(kind: OptimizerKind, params: &ClassifierParams) -> Optimizer {
        let adam = match kind {
            OptimizerKind::Sgd => None,
            OptimizerKind::Adam => Some(AdamState {
                m: params.zeros_like(),
                v: params.zeros_like(),
                t: 0,
            }),
        };
        Optimizer { kind, adam }
    }

    pub fn step(
        &mut self,
        params: &mut ClassifierParams,
        grads: &Gradients,
        learning_rate: f64,
    ) -> Result<()> {
        if !grads.all_finite() {
            return Err(Error::NonFinite { context: "optimizer gradients" });
        }
        match self.kind {
            OptimizerKind::Sgd => {
                for (layer, g) in params.layers.iter_mut().zip(&grads.layers) {
                    for (w, gw) in layer.weights.iter_mut().zip(&g.weights) {
                        *w -= learning_rate * gw;
                    }
                    for (b, gb) in layer.biases.iter_mut().zip(&g.biases) {
                        *b -= learning_rate * gb;
                    }
                }
            }
            OptimizerKind::Adam => {
                let state = self.adam.as_mut().expect("adam state");
                state.t += 1;
                let bc1 = 1.0 - libm::pow(ADAM_BETA1, state.t as f64);
                let bc2 = 1.0 - libm::pow(ADAM_BETA2, state.t as f64);
                for li in 0..params.layers.len() {
                    let g = &grads.layers[li];
                    let m = &mut state.m.layers[li];
                    let v = &mut state.v.layers[li];
                    let layer = &mut params.layers[li];
                    for i in 0..g.weights.len() {
                        adam_update(
                            &mut layer.weights[i],
                            &mut m.weights[i],
                            &mut v.weights[i],
                            g.weights[i],
                            learning_rate,
                            bc1,
                            bc2,
                        );
                    }
                    for i in 0..g.biases.len() {
                        adam_update(
                            &mut layer.biases[i],
                            &mut m.biases[i],
                            &mut v.biases[i],
                            g.biases[i],
                            learning_rate,
                            bc1,
                            bc2,
                        );
                    }
                }
            }
        }
        Ok(())
    }
}

#[inline]
fn adam_update(w: &mut f64, m: &mut f64, v: &mut f64, g: f64, lr: f64, bc1: f64, bc2: f64) {
    *m = ADAM_BETA1 * *m + (1.0 - ADAM_BETA1) * g;
    *v = ADAM_BETA2 * *v + (1.0 - ADAM_BETA2) * g * g;
    let m_hat = *m / bc1;
    let v_hat = *v / bc2;
    *w -= lr * m_hat / (libm::sqrt(v_hat) + ADAM_EPS);
}

/// Validate that a model can score the given dataset arity.
pub fn check_arity(params: &ClassifierParams, expected_outputs: usize) -> Result<()> {
    if params.num_outputs != expected_outputs {
        return Err(Error::ModelMismatch(format!(
            "model has {} outputs, expected {expected_outputs}",
            params.num_outputs
        )));
    }
    Ok(())
}
