use crate::corpus::Mode;
use crate::error::{Error, Result};
use crate::imbalance::ClassWeights;

use super::PredictionVector;

/// Probabilities are clipped to `[PROB_FLOOR, 1]` before taking logs.
pub const PROB_FLOOR: f64 = 1e-12;

/// One-hot (multiclass) or multi-hot (multilabel) target vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Target {
    pub values: Vec<f64>,
}

impl Target {
    pub fn one_hot(len: usize, class: usize) -> Self {
        let mut values = vec![0.0; len];
        values[class] = 1.0;
        Target { values }
    }

    pub fn multi_hot(len: usize, labels: &[usize]) -> Self {
        let mut values = vec![0.0; len];
        for &j in labels {
            values[j] = 1.0;
        }
        Target { values }
    }

    fn hot_index(&self) -> Option<usize> {
        let mut hot = None;
        for (j, &v) in self.values.iter().enumerate() {
            if v == 1.0 {
                if hot.is_some() {
                    return None;
                }
                hot = Some(j);
            } else if v != 0.0 {
                return None;
            }
        }
        hot
    }
}

/// Loss value and its gradient with respect to the pre-activation logits.
#[derive(Debug, Clone, PartialEq)]
pub struct LossGrad {
    pub loss: f64,
    pub grad: Vec<f64>,
}

/// Class-weighted cross-entropy `Σ_j −w_j · y_j · log p_j` over softmax outputs.
pub fn weighted_ce_loss(pred: &PredictionVector, target: &Target, cw: &ClassWeights) -> Result<LossGrad> {
    if pred.mode != Mode::Multiclass {
        return Err(Error::InvalidArgument("weighted cross-entropy needs multiclass predictions".into()));
    }
    let l = pred.probs.len();
    if target.values.len() != l || cw.len() != l {
        return Err(Error::DimensionMismatch {
            expected: l,
            got: if target.values.len() != l { target.values.len() } else { cw.len() },
        });
    }
    let y = target
        .hot_index()
        .ok_or_else(|| Error::InvalidArgument("cross-entropy target must be one-hot".into()))?;
    let w = cw.weights[y];
    let loss = -w * pred.probs[y].clamp(PROB_FLOOR, 1.0).ln();
    let grad = pred
        .probs
        .iter()
        .enumerate()
        .map(|(k, &p)| w * (p - if k == y { 1.0 } else { 0.0 }))
        .collect();
    Ok(LossGrad { loss, grad })
}

/// Binary cross-entropy averaged over labels, on sigmoid outputs.
pub fn bce_loss(pred: &PredictionVector, target: &Target) -> Result<LossGrad> {
    if pred.mode != Mode::Multilabel {
        return Err(Error::InvalidArgument("binary cross-entropy needs multilabel predictions".into()));
    }
    let l = pred.probs.len();
    if target.values.len() != l {
        return Err(Error::DimensionMismatch {
            expected: l,
            got: target.values.len(),
        });
    }
    if let Some(v) = target.values.iter().find(|&&v| v != 0.0 && v != 1.0) {
        return Err(Error::InvalidArgument(format!("multi-hot target entry {v} is not 0 or 1")));
    }
    let mut loss = 0.0;
    let mut grad = Vec::with_capacity(l);
    for (&p, &y) in pred.probs.iter().zip(&target.values) {
        let pos = p.clamp(PROB_FLOOR, 1.0).ln();
        let neg = (1.0 - p).clamp(PROB_FLOOR, 1.0).ln();
        loss -= y * pos + (1.0 - y) * neg;
        grad.push((p - y) / l as f64);
    }
    Ok(LossGrad {
        loss: loss / l as f64,
        grad,
    })
}
