use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::{Gradients, ModelParams};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdamWConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
}

impl Default for AdamWConfig {
    fn default() -> Self {
        AdamWConfig {
            lr: 3e-5,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 0.01,
        }
    }
}

impl AdamWConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.lr > 0.0
            && self.lr.is_finite()
            && (0.0..1.0).contains(&self.beta1)
            && (0.0..1.0).contains(&self.beta2)
            && self.eps > 0.0
            && self.weight_decay >= 0.0
            && self.weight_decay.is_finite();
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("invalid AdamW hyperparameters {self:?}")))
        }
    }
}

/// Step counter and first/second moment accumulators, one per parameter tensor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerState {
    pub step: u64,
    pub m: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
    pub hyper: AdamWConfig,
}

impl OptimizerState {
    pub fn new(params: &ModelParams, hyper: AdamWConfig) -> Self {
        let zeros: Vec<Vec<f64>> = params.tensors().iter().map(|(t, _)| vec![0.0; t.len()]).collect();
        OptimizerState {
            step: 0,
            m: zeros.clone(),
            v: zeros,
            hyper,
        }
    }
}

/// One AdamW update. Weight decay is applied to the weights directly (not via
/// the gradient) and skips bias vectors.
pub fn grad_step(params: &mut ModelParams, grads: &Gradients, state: &mut OptimizerState) -> Result<()> {
    state.hyper.validate()?;
    let shapes: Vec<usize> = params.tensors().iter().map(|(t, _)| t.len()).collect();
    let grad_shapes: Vec<usize> = grads.tensors.iter().map(Vec::len).collect();
    let state_shapes: Vec<usize> = state.m.iter().map(Vec::len).collect();
    if shapes != grad_shapes || shapes != state_shapes || state.v.len() != shapes.len() {
        return Err(Error::InvalidArgument(format!(
            "shape mismatch: params {shapes:?}, gradients {grad_shapes:?}, optimizer {state_shapes:?}"
        )));
    }
    if let Some(tensor) = grads.tensors.iter().position(|g| g.iter().any(|v| !v.is_finite())) {
        return Err(Error::NonFiniteGradient { tensor });
    }

    let AdamWConfig {
        lr,
        beta1,
        beta2,
        eps,
        weight_decay,
    } = state.hyper;
    state.step += 1;
    let t = state.step as i32;
    let c1 = 1.0 - beta1.powi(t);
    let c2 = 1.0 - beta2.powi(t);

    for (k, (param, is_weight)) in params.tensors_mut().into_iter().enumerate() {
        let (m, v, g) = (&mut state.m[k], &mut state.v[k], &grads.tensors[k]);
        let decay = if is_weight { weight_decay } else { 0.0 };
        for i in 0..param.len() {
            m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
            v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
            let m_hat = m[i] / c1;
            let v_hat = v[i] / c2;
            param[i] -= lr * (m_hat / (v_hat.sqrt() + eps) + decay * param[i]);
        }
    }
    Ok(())
}
