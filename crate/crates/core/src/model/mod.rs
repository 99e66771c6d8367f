//! Shallow trainable classifier: an optional ReLU trunk shared across tasks and a
//! task-specific linear head, softmax for multiclass and independent sigmoids
//! for multilabel outputs.

mod checkpoint;
mod loss;
mod optim;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::Mode;
use crate::error::{Error, Result};
use crate::features::FeatureVector;

pub use checkpoint::{ModelCheckpoint, Provenance};
pub use loss::{bce_loss, weighted_ce_loss, LossGrad, Target, PROB_FLOOR};
pub use optim::{grad_step, AdamWConfig, OptimizerState};

/// Fully connected layer; `weights` is row-major `dim_in × dim_out`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    pub dim_in: usize,
    pub dim_out: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Dense {
    fn xavier(dim_in: usize, dim_out: usize, rng: &mut ChaCha8Rng) -> Self {
        let limit = (6.0 / (dim_in + dim_out) as f64).sqrt();
        Dense {
            dim_in,
            dim_out,
            weights: (0..dim_in * dim_out).map(|_| rng.random_range(-limit..=limit)).collect(),
            bias: vec![0.0; dim_out],
        }
    }

    fn zeros(dim_in: usize, dim_out: usize) -> Self {
        Dense {
            dim_in,
            dim_out,
            weights: vec![0.0; dim_in * dim_out],
            bias: vec![0.0; dim_out],
        }
    }

    /// `bias + xᵀW` over the stored entries of `x`.
    fn apply<I: Iterator<Item = (usize, f64)>>(&self, x: I) -> Vec<f64> {
        let mut out = self.bias.clone();
        for (i, xi) in x {
            if xi == 0.0 {
                continue;
            }
            let row = &self.weights[i * self.dim_out..(i + 1) * self.dim_out];
            for (o, w) in out.iter_mut().zip(row) {
                *o += xi * w;
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trunk {
    pub layer: Dense,
    pub activation: Activation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub trunk: Option<Trunk>,
    pub head: Dense,
    pub mode: Mode,
}

/// Probabilities from one forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionVector {
    pub probs: Vec<f64>,
    pub mode: Mode,
}

/// Gradient tensors aligned with [`ModelParams::tensors`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub tensors: Vec<Vec<f64>>,
}

impl Gradients {
    pub fn zeros_like(params: &ModelParams) -> Self {
        Gradients {
            tensors: params.tensors().iter().map(|(t, _)| vec![0.0; t.len()]).collect(),
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for t in &mut self.tensors {
            for g in t.iter_mut() {
                *g *= factor;
            }
        }
    }
}

/// Intermediate values kept for backpropagation.
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    hidden_pre: Option<Vec<f64>>,
    hidden: Option<Vec<f64>>,
    pub logits: Vec<f64>,
    pub prediction: PredictionVector,
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Xavier-uniform weights, zero biases. The trunk, when present, is drawn before the head.
pub fn init_model(dim_in: usize, hidden: Option<usize>, label_count: usize, mode: Mode, seed: u64) -> Result<ModelParams> {
    if dim_in == 0 || label_count == 0 || hidden == Some(0) {
        return Err(Error::InvalidArgument(format!(
            "model dimensions must be positive (input {dim_in}, hidden {hidden:?}, labels {label_count})"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let trunk = hidden.map(|h| Trunk {
        layer: Dense::xavier(dim_in, h, &mut rng),
        activation: Activation::Relu,
    });
    let head_in = hidden.unwrap_or(dim_in);
    Ok(ModelParams {
        trunk,
        head: Dense::xavier(head_in, label_count, &mut rng),
        mode,
    })
}

/// Keeps the trunk bit for bit and draws a fresh head for the next task.
pub fn transfer_trunk(source: &ModelParams, new_label_count: usize, new_mode: Mode, seed: u64) -> Result<ModelParams> {
    let trunk = source
        .trunk
        .clone()
        .ok_or_else(|| Error::InvalidArgument("task-dependent transfer needs a model with a trunk".into()))?;
    if new_label_count == 0 {
        return Err(Error::InvalidArgument("new head needs at least one label".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let head = Dense::xavier(trunk.layer.dim_out, new_label_count, &mut rng);
    Ok(ModelParams {
        trunk: Some(trunk),
        head,
        mode: new_mode,
    })
}

impl ModelParams {
    /// All-zero parameters, mostly useful in tests.
    pub fn zeros(dim_in: usize, hidden: Option<usize>, label_count: usize, mode: Mode) -> Self {
        ModelParams {
            trunk: hidden.map(|h| Trunk {
                layer: Dense::zeros(dim_in, h),
                activation: Activation::Relu,
            }),
            head: Dense::zeros(hidden.unwrap_or(dim_in), label_count),
            mode,
        }
    }

    pub fn dim_in(&self) -> usize {
        match &self.trunk {
            Some(t) => t.layer.dim_in,
            None => self.head.dim_in,
        }
    }

    pub fn label_count(&self) -> usize {
        self.head.dim_out
    }

    /// Parameter tensors in a fixed order, each flagged with whether it is a
    /// weight matrix (true) or a bias (false).
    pub fn tensors(&self) -> Vec<(&[f64], bool)> {
        let mut out = Vec::with_capacity(4);
        if let Some(t) = &self.trunk {
            out.push((t.layer.weights.as_slice(), true));
            out.push((t.layer.bias.as_slice(), false));
        }
        out.push((self.head.weights.as_slice(), true));
        out.push((self.head.bias.as_slice(), false));
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<(&mut [f64], bool)> {
        let mut out = Vec::with_capacity(4);
        if let Some(t) = &mut self.trunk {
            out.push((t.layer.weights.as_mut_slice(), true));
            out.push((t.layer.bias.as_mut_slice(), false));
        }
        out.push((self.head.weights.as_mut_slice(), true));
        out.push((self.head.bias.as_mut_slice(), false));
        out
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|(t, _)| t.iter().all(|v| v.is_finite()))
    }

    pub fn trace(&self, x: &FeatureVector) -> Result<ForwardTrace> {
        if x.dim != self.dim_in() {
            return Err(Error::DimensionMismatch {
                expected: self.dim_in(),
                got: x.dim,
            });
        }
        let (hidden_pre, hidden, logits) = match &self.trunk {
            Some(t) => {
                let pre = t.layer.apply(x.iter());
                let h: Vec<f64> = pre.iter().map(|&v| v.max(0.0)).collect();
                let logits = self.head.apply(h.iter().copied().enumerate());
                (Some(pre), Some(h), logits)
            }
            None => (None, None, self.head.apply(x.iter())),
        };
        let probs = match self.mode {
            Mode::Multiclass => softmax(&logits),
            Mode::Multilabel => logits.iter().map(|&z| sigmoid(z)).collect(),
        };
        Ok(ForwardTrace {
            hidden_pre,
            hidden,
            logits,
            prediction: PredictionVector { probs, mode: self.mode },
        })
    }

    /// Accumulates `scale · ∂loss/∂params` into `grads`, given `∂loss/∂logits`.
    pub fn backward(&self, x: &FeatureVector, trace: &ForwardTrace, dlogits: &[f64], scale: f64, grads: &mut Gradients) {
        let l = self.head.dim_out;
        let offset = if self.trunk.is_some() { 2 } else { 0 };
        let (before, head) = grads.tensors.split_at_mut(offset);
        let (head_w, head_b) = head.split_at_mut(1);
        let (head_w, head_b) = (&mut head_w[0], &mut head_b[0]);
        for (gb, d) in head_b.iter_mut().zip(dlogits) {
            *gb += scale * d;
        }
        match (&self.trunk, &trace.hidden, &trace.hidden_pre) {
            (Some(trunk), Some(h), Some(pre)) => {
                let mut dh = vec![0.0; h.len()];
                for (j, &hj) in h.iter().enumerate() {
                    let row = &self.head.weights[j * l..(j + 1) * l];
                    let grow = &mut head_w[j * l..(j + 1) * l];
                    let mut acc = 0.0;
                    for o in 0..l {
                        grow[o] += scale * hj * dlogits[o];
                        acc += row[o] * dlogits[o];
                    }
                    dh[j] = if pre[j] > 0.0 { acc } else { 0.0 };
                }
                let hdim = trunk.layer.dim_out;
                let (tw, tb) = before.split_at_mut(1);
                for (gb, d) in tb[0].iter_mut().zip(&dh) {
                    *gb += scale * d;
                }
                for (i, xi) in x.iter() {
                    if xi == 0.0 {
                        continue;
                    }
                    let grow = &mut tw[0][i * hdim..(i + 1) * hdim];
                    for (g, d) in grow.iter_mut().zip(&dh) {
                        *g += scale * xi * d;
                    }
                }
            }
            _ => {
                for (i, xi) in x.iter() {
                    if xi == 0.0 {
                        continue;
                    }
                    let grow = &mut head_w[i * l..(i + 1) * l];
                    for (g, d) in grow.iter_mut().zip(dlogits) {
                        *g += scale * xi * d;
                    }
                }
            }
        }
    }
}

pub fn forward(params: &ModelParams, x: &FeatureVector) -> Result<PredictionVector> {
    Ok(params.trace(x)?.prediction)
}

/// A decoded prediction: one label index for multiclass, a label set for multilabel.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Decision {
    Label(usize),
    Labels(Vec<usize>),
}

impl Decision {
    pub fn as_set(&self) -> Vec<usize> {
        match self {
            Decision::Label(j) => vec![*j],
            Decision::Labels(s) => s.clone(),
        }
    }
}

/// Index of the largest value; ties go to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (j, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = j;
        }
    }
    best
}

/// Multiclass: argmax. Multilabel: labels with probability above `threshold`,
/// with `none_label` removed from the emitted set.
pub fn decide(pred: &PredictionVector, threshold: f64, none_label: Option<usize>) -> Decision {
    match pred.mode {
        Mode::Multiclass => Decision::Label(argmax(&pred.probs)),
        Mode::Multilabel => Decision::Labels(
            pred.probs
                .iter()
                .enumerate()
                .filter(|&(j, &p)| p > threshold && Some(j) != none_label)
                .map(|(j, _)| j)
                .collect(),
        ),
    }
}

pub fn predict(params: &ModelParams, x: &FeatureVector, threshold: f64, none_label: Option<usize>) -> Result<Decision> {
    Ok(decide(&forward(params, x)?, threshold, none_label))
}
