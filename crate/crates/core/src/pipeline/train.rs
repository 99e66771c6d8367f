use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::corpus::{LabelSpace, Mode, Task};
use crate::error::{Error, Result};
use crate::imbalance::{sample_weights, undersample, weighted_batches, Batcher, ClassWeights, ShuffledBatches};
use crate::model::{
    bce_loss, decide, grad_step, weighted_ce_loss, AdamWConfig, Decision, Gradients, ModelCheckpoint, ModelParams,
    OptimizerState, Provenance, Target,
};

use super::metrics::{macro_f1, micro_f1};
use super::TaskData;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    /// Each task trained independently from a fresh initialisation.
    Agnostic,
    /// T1 → T2 → T3, carrying the trunk forward and re-initialising the head.
    Dependent,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct Seeds {
    pub folds: u64,
    pub init: u64,
    pub sampler: u64,
}

impl Default for Seeds {
    fn default() -> Self {
        Seeds {
            folds: 13,
            init: 13,
            sampler: 13,
        }
    }
}

impl Seeds {
    pub fn all(seed: u64) -> Self {
        Seeds {
            folds: seed,
            init: seed,
            sampler: seed,
        }
    }
}

/// Per-fold seed: `base + fold`, with the task ordinal in the high 32 bits so the
/// three tasks of one fold draw from distinct streams.
pub fn derive_seed(base: u64, task: Task, fold: usize) -> u64 {
    base.wrapping_add(fold as u64) ^ (task.ordinal() << 32)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs_max: usize,
    pub patience: usize,
    pub batch_size: usize,
    pub k: usize,
    pub strategy: Strategy,
    pub class_weights: bool,
    pub sample_weights: bool,
    pub undersample: bool,
    /// Trunk width; `None` trains a bare linear head.
    pub hidden: Option<usize>,
    pub threshold: f64,
    /// Fraction of each training split held out for early stopping. `None`
    /// selects the best epoch on the evaluation fold itself.
    pub val_frac: Option<f64>,
    pub sampler_epoch_multiplier: f64,
    pub optimizer: AdamWConfig,
    pub seeds: Seeds,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs_max: 30,
            patience: 5,
            batch_size: 16,
            k: 10,
            strategy: Strategy::Dependent,
            class_weights: true,
            sample_weights: true,
            undersample: false,
            hidden: Some(128),
            threshold: 0.5,
            val_frac: None,
            sampler_epoch_multiplier: 1.0,
            optimizer: AdamWConfig::default(),
            seeds: Seeds::default(),
        }
    }
}

impl TrainConfig {
    /// Checks field constraints, reporting the offending field path.
    pub fn validate(&self) -> std::result::Result<(), (String, String)> {
        let fail = |field: &str, msg: String| Err((field.to_string(), msg));
        if self.epochs_max == 0 {
            return fail("epochs_max", "must be at least 1".into());
        }
        if self.patience > self.epochs_max {
            return fail(
                "patience",
                format!("{} exceeds epochs_max {}", self.patience, self.epochs_max),
            );
        }
        if self.batch_size == 0 {
            return fail("batch_size", "must be at least 1".into());
        }
        if self.k < 2 {
            return fail("k", format!("must be at least 2, got {}", self.k));
        }
        if self.hidden == Some(0) {
            return fail("hidden", "must be positive or null".into());
        }
        if self.strategy == Strategy::Dependent && self.hidden.is_none() {
            return fail("strategy", "task-dependent training needs a trunk (hidden)".into());
        }
        if !(0.0..1.0).contains(&self.threshold) {
            return fail("threshold", format!("{} outside [0, 1)", self.threshold));
        }
        if let Some(f) = self.val_frac {
            if !(f > 0.0 && f < 1.0) {
                return fail("val_frac", format!("{f} outside (0, 1)"));
            }
        }
        if !(self.sampler_epoch_multiplier > 0.0 && self.sampler_epoch_multiplier.is_finite()) {
            return fail("sampler_epoch_multiplier", "must be positive".into());
        }
        if let Err(e) = self.optimizer.validate() {
            return fail("optimizer", e.to_string());
        }
        Ok(())
    }

    /// Configuration actually used for `task`: class weights and under-sampling
    /// only apply to the multiclass task.
    pub fn for_task(&self, task: Task) -> TrainConfig {
        let multiclass = task.mode() == Mode::Multiclass;
        TrainConfig {
            class_weights: self.class_weights && multiclass,
            undersample: self.undersample && multiclass,
            ..self.clone()
        }
    }
}

/// Result of training one task on one fold.
#[derive(Debug, Clone)]
pub struct FoldOutcome {
    pub checkpoint: ModelCheckpoint,
    /// Parameters training started from (epoch 0).
    pub initial: ModelParams,
    pub epoch_scores: Vec<f64>,
    pub train_losses: Vec<f64>,
    pub epochs_trained: usize,
}

/// Task metric: macro-F1 for multiclass, micro-F1 (None excluded) for multilabel.
pub fn score(space: &LabelSpace, preds: &[Decision], golds: &[&[usize]]) -> Result<f64> {
    match space.mode {
        Mode::Multiclass => {
            let p: Vec<usize> = preds.iter().map(|d| d.as_set()[0]).collect();
            let g: Vec<usize> = golds.iter().map(|g| g[0]).collect();
            macro_f1(&p, &g, space.len())
        }
        Mode::Multilabel => {
            let p: Vec<Vec<usize>> = preds.iter().map(Decision::as_set).collect();
            let g: Vec<Vec<usize>> = golds.iter().map(|g| g.to_vec()).collect();
            micro_f1(&p, &g, space.none_index())
        }
    }
}

pub fn predict_indices(params: &ModelParams, data: &TaskData, indices: &[usize], threshold: f64) -> Result<Vec<Decision>> {
    let none = data.space.none_index();
    indices
        .iter()
        .map(|&i| Ok(decide(&params.trace(&data.features[i])?.prediction, threshold, none)))
        .collect()
}

pub fn evaluate(params: &ModelParams, data: &TaskData, indices: &[usize], threshold: f64) -> Result<f64> {
    let preds = predict_indices(params, data, indices, threshold)?;
    let golds: Vec<&[usize]> = indices.iter().map(|&i| data.labels[i].as_slice()).collect();
    score(&data.space, &preds, &golds)
}

/// Trains from `initial` on `train`, scoring `eval` after every epoch, and keeps
/// the best-scoring epoch. Training stops once `patience` consecutive epochs
/// fail to improve on the best score.
pub fn train_fold(
    data: &TaskData,
    train: &[usize],
    eval: &[usize],
    initial: ModelParams,
    config: &TrainConfig,
    fold: usize,
) -> Result<FoldOutcome> {
    if let Err((field, msg)) = config.validate() {
        return Err(Error::InvalidArgument(format!("{field}: {msg}")));
    }
    if train.is_empty() || eval.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "fold {fold}: empty split (train {}, eval {})",
            train.len(),
            eval.len()
        )));
    }
    let train_ids: HashSet<&str> = train.iter().map(|&i| data.ids[i].as_str()).collect();
    if let Some(&i) = eval.iter().find(|&&i| train_ids.contains(data.ids[i].as_str())) {
        return Err(Error::InvalidArgument(format!(
            "fold {fold}: unit {:?} is in both train and eval splits",
            data.ids[i]
        )));
    }
    let task = data.task;
    let mode = data.space.mode;
    if (config.class_weights || config.undersample) && mode != Mode::Multiclass {
        return Err(Error::InvalidArgument(format!(
            "{task}: class weights and under-sampling apply to multiclass tasks only"
        )));
    }
    if initial.dim_in() != data.dim() || initial.label_count() != data.space.len() || initial.mode != mode {
        return Err(Error::InvalidArgument(format!(
            "{task}: model (input {}, labels {}, {}) does not fit data (input {}, labels {}, {mode})",
            initial.dim_in(),
            initial.label_count(),
            initial.mode,
            data.dim(),
            data.space.len()
        )));
    }

    let sampler_seed = derive_seed(config.seeds.sampler, task, fold);
    let train: Vec<usize> = if config.undersample {
        let labels: Vec<Vec<usize>> = train.iter().map(|&i| data.labels[i].clone()).collect();
        undersample(&labels, &data.space, sampler_seed)?
            .into_iter()
            .map(|j| train[j])
            .collect()
    } else {
        train.to_vec()
    };
    let train_labels: Vec<Vec<usize>> = train.iter().map(|&i| data.labels[i].clone()).collect();
    let train_space = data.space.recount(&train_labels);

    let class_weights = if config.class_weights {
        ClassWeights::for_space(&train_space)?
    } else {
        ClassWeights::uniform(data.space.len())
    };
    let mut batcher = if config.sample_weights {
        let weights = sample_weights(&train_labels, &train_space)?;
        Batcher::Weighted(
            weighted_batches(&weights, config.batch_size, sampler_seed)?
                .with_epoch_multiplier(config.sampler_epoch_multiplier),
        )
    } else {
        Batcher::Shuffled(ShuffledBatches::new(train.len(), config.batch_size, sampler_seed)?)
    };
    let targets: Vec<Target> = train_labels
        .iter()
        .map(|labels| match mode {
            Mode::Multiclass => Target::one_hot(data.space.len(), labels[0]),
            Mode::Multilabel => Target::multi_hot(data.space.len(), labels),
        })
        .collect();

    let mut params = initial.clone();
    let mut optimizer = OptimizerState::new(&params, config.optimizer);
    let mut best: Option<(f64, usize, ModelParams, OptimizerState)> = None;
    let mut epoch_scores = Vec::new();
    let mut train_losses = Vec::new();
    let mut since_best = 0usize;

    for epoch in 1..=config.epochs_max {
        let mut epoch_loss = 0.0;
        let mut seen = 0usize;
        for (b, batch) in batcher.next_epoch().iter().enumerate() {
            let mut grads = Gradients::zeros_like(&params);
            let scale = 1.0 / batch.len() as f64;
            let mut batch_loss = 0.0;
            for &local in batch {
                let x = &data.features[train[local]];
                let trace = params.trace(x)?;
                let lg = match mode {
                    Mode::Multiclass => weighted_ce_loss(&trace.prediction, &targets[local], &class_weights)?,
                    Mode::Multilabel => bce_loss(&trace.prediction, &targets[local])?,
                };
                batch_loss += lg.loss;
                params.backward(x, &trace, &lg.grad, scale, &mut grads);
            }
            if !batch_loss.is_finite() {
                return Err(Error::NonFiniteLoss { epoch, batch: b });
            }
            epoch_loss += batch_loss;
            seen += batch.len();
            grad_step(&mut params, &grads, &mut optimizer)?;
        }
        train_losses.push(epoch_loss / seen.max(1) as f64);

        let s = evaluate(&params, data, eval, config.threshold)?;
        epoch_scores.push(s);
        if best.as_ref().is_none_or(|(b, ..)| s > *b) {
            best = Some((s, epoch, params.clone(), optimizer.clone()));
            since_best = 0;
        } else {
            since_best += 1;
        }
        if since_best >= config.patience {
            break;
        }
    }

    let (validation_score, epoch, best_params, best_optimizer) = best.expect("at least one epoch runs");
    Ok(FoldOutcome {
        checkpoint: ModelCheckpoint::new(
            data.space.labels.clone(),
            data.space.none_index(),
            best_params,
            best_optimizer,
            Provenance {
                task,
                fold,
                epoch,
                validation_score,
            },
        ),
        initial,
        epochs_trained: epoch_scores.len(),
        epoch_scores,
        train_losses,
    })
}
