use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{FoldPlan, Mode, Task};
use crate::error::{Error, Result};
use crate::model::{init_model, transfer_trunk, Decision, ModelCheckpoint, ModelParams};

use super::metrics::{confusion_matrix, ConfusionMatrix};
use super::train::{derive_seed, predict_indices, score, train_fold, FoldOutcome, Strategy, TrainConfig};
use super::TaskData;

/// Which split picked the best epoch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Selection {
    /// The evaluation fold itself; reported scores are optimistic.
    TestFold,
    /// A held-out slice of the training folds.
    InnerValidation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldReport {
    pub fold: usize,
    /// Task metric of the best checkpoint on the evaluation fold.
    pub score: f64,
    /// Score that selected the best epoch.
    pub selection_score: f64,
    pub best_epoch: usize,
    pub epochs_trained: usize,
    pub train_size: usize,
    pub eval_size: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub confusion: Option<ConfusionMatrix>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub task: Task,
    pub metric: String,
    pub strategy: Strategy,
    pub selection: Selection,
    pub k: usize,
    pub folds: Vec<FoldReport>,
    pub mean: f64,
    /// Sum of the per-fold confusion matrices (multiclass only).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub confusion_total: Option<ConfusionMatrix>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub by_language: Option<BTreeMap<String, f64>>,
    /// Labeled units whose article is not in the fold plan.
    pub excluded_units: usize,
}

impl CvReport {
    pub fn fold_scores(&self) -> Vec<f64> {
        self.folds.iter().map(|f| f.score).collect()
    }
}

/// A finished cross-validation run of one task.
#[derive(Debug, Clone)]
pub struct CvOutcome {
    pub report: CvReport,
    /// Best checkpoint of each fold, in fold order.
    pub checkpoints: Vec<ModelCheckpoint>,
    /// Out-of-fold decisions as (unit index, decision).
    pub oof: Vec<(usize, Decision)>,
}

impl CvOutcome {
    /// Scores the pooled out-of-fold predictions separately for each language.
    pub fn add_language_breakdown(&mut self, data: &TaskData) -> Result<()> {
        let mut by_lang: BTreeMap<&str, (Vec<Decision>, Vec<&[usize]>)> = BTreeMap::new();
        for (i, d) in &self.oof {
            let entry = by_lang.entry(data.languages[*i].as_str()).or_default();
            entry.0.push(d.clone());
            entry.1.push(&data.labels[*i]);
        }
        let mut out = BTreeMap::new();
        for (lang, (preds, golds)) in by_lang {
            out.insert(lang.to_string(), score(&data.space, &preds, &golds)?);
        }
        self.report.by_language = Some(out);
        Ok(())
    }
}

/// Train/eval unit indices of `fold`, plus the number of units outside the plan.
pub fn split_fold(data: &TaskData, plan: &FoldPlan, fold: usize) -> (Vec<usize>, Vec<usize>, usize) {
    let (mut train, mut eval, mut excluded) = (Vec::new(), Vec::new(), 0);
    for (i, article) in data.article_ids.iter().enumerate() {
        match plan.fold_of(article) {
            Some(f) if f == fold => eval.push(i),
            Some(_) => train.push(i),
            None => excluded += 1,
        }
    }
    (train, eval, excluded)
}

struct FoldResult {
    outcome: FoldOutcome,
    report: FoldReport,
    oof: Vec<(usize, Decision)>,
    excluded: usize,
}

fn fit_fold(
    data: &TaskData,
    plan: &FoldPlan,
    fold: usize,
    initial: ModelParams,
    config: &TrainConfig,
) -> Result<FoldResult> {
    let (train, test, excluded) = split_fold(data, plan, fold);
    let (fit, select) = match config.val_frac {
        None => (train, test.clone()),
        Some(frac) => {
            let mut shuffled = train;
            shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(derive_seed(config.seeds.folds, data.task, fold)));
            let n_val = ((shuffled.len() as f64 * frac).ceil() as usize).clamp(1, shuffled.len().saturating_sub(1));
            let fit = shuffled.split_off(n_val);
            (fit, shuffled)
        }
    };
    let outcome = train_fold(data, &fit, &select, initial, config, fold)?;
    let params = &outcome.checkpoint.params;
    let preds = predict_indices(params, data, &test, config.threshold)?;
    let golds: Vec<&[usize]> = test.iter().map(|&i| data.labels[i].as_slice()).collect();
    let test_score = score(&data.space, &preds, &golds)?;
    let confusion = match data.space.mode {
        Mode::Multiclass => {
            let p: Vec<usize> = preds.iter().map(|d| d.as_set()[0]).collect();
            let g: Vec<usize> = golds.iter().map(|g| g[0]).collect();
            Some(confusion_matrix(&p, &g, &data.space.labels)?)
        }
        Mode::Multilabel => None,
    };
    let report = FoldReport {
        fold,
        score: test_score,
        selection_score: outcome.checkpoint.provenance.validation_score,
        best_epoch: outcome.checkpoint.provenance.epoch,
        epochs_trained: outcome.epochs_trained,
        train_size: fit.len(),
        eval_size: test.len(),
        confusion,
    };
    Ok(FoldResult {
        oof: test.into_iter().zip(preds).collect(),
        outcome,
        report,
        excluded,
    })
}

fn assemble(data: &TaskData, plan: &FoldPlan, config: &TrainConfig, results: Vec<FoldResult>) -> CvOutcome {
    let k = plan.k;
    let mean = results.iter().map(|r| r.report.score).sum::<f64>() / k as f64;
    let confusion_total = match data.space.mode {
        Mode::Multiclass => {
            let mut total = ConfusionMatrix::zeros(data.space.labels.clone());
            for r in &results {
                if let Some(c) = &r.report.confusion {
                    total.add(c);
                }
            }
            Some(total)
        }
        Mode::Multilabel => None,
    };
    let excluded_units = results.first().map_or(0, |r| r.excluded);
    let mut oof = Vec::new();
    let mut checkpoints = Vec::with_capacity(k);
    let mut folds = Vec::with_capacity(k);
    for r in results {
        oof.extend(r.oof);
        checkpoints.push(r.outcome.checkpoint);
        folds.push(r.report);
    }
    oof.sort_by_key(|(i, _)| *i);
    CvOutcome {
        report: CvReport {
            task: data.task,
            metric: match data.space.mode {
                Mode::Multiclass => "macro-f1".into(),
                Mode::Multilabel => "micro-f1".into(),
            },
            strategy: config.strategy,
            selection: if config.val_frac.is_some() {
                Selection::InnerValidation
            } else {
                Selection::TestFold
            },
            k,
            folds,
            mean,
            confusion_total,
            by_language: None,
            excluded_units,
        },
        checkpoints,
        oof,
    }
}

fn check_plan(config: &TrainConfig, plan: &FoldPlan) -> Result<()> {
    if let Err((field, msg)) = config.validate() {
        return Err(Error::InvalidArgument(format!("{field}: {msg}")));
    }
    if plan.k != config.k {
        return Err(Error::InvalidArgument(format!(
            "fold plan has {} folds but the configuration asks for {}",
            plan.k, config.k
        )));
    }
    Ok(())
}

fn fresh_init(data: &TaskData, config: &TrainConfig, fold: usize) -> Result<ModelParams> {
    init_model(
        data.dim(),
        config.hidden,
        data.space.len(),
        data.space.mode,
        derive_seed(config.seeds.init, data.task, fold),
    )
}

/// k-fold cross-validation of one task: fold i is evaluated, the rest train.
/// Folds run concurrently; results are ordered by fold index.
pub fn run_cv(data: &TaskData, plan: &FoldPlan, config: &TrainConfig) -> Result<CvOutcome> {
    check_plan(config, plan)?;
    let config = config.for_task(data.task);
    let results = (0..plan.k)
        .into_par_iter()
        .map(|fold| fit_fold(data, plan, fold, fresh_init(data, &config, fold)?, &config))
        .collect::<Result<Vec<_>>>()?;
    Ok(assemble(data, plan, &config, results))
}

fn check_chain(tasks: &[TaskData]) -> Result<()> {
    if tasks.is_empty() {
        return Err(Error::InvalidArgument("no tasks to train".into()));
    }
    if tasks.windows(2).any(|w| w[0].task >= w[1].task) {
        return Err(Error::InvalidArgument("tasks must be distinct and ordered T1, T2, T3".into()));
    }
    Ok(())
}

/// One fold of the task-dependent chain: the first task starts fresh, every
/// later task starts from the previous task's best trunk with a new head.
pub fn run_chain_fold(tasks: &[TaskData], plan: &FoldPlan, config: &TrainConfig, fold: usize) -> Result<Vec<FoldOutcome>> {
    Ok(chain_fold(tasks, plan, config, fold)?
        .into_iter()
        .map(|r| r.outcome)
        .collect())
}

fn chain_fold(tasks: &[TaskData], plan: &FoldPlan, config: &TrainConfig, fold: usize) -> Result<Vec<FoldResult>> {
    let mut results: Vec<FoldResult> = Vec::with_capacity(tasks.len());
    for data in tasks {
        let task_config = config.for_task(data.task);
        let initial = match results.last() {
            None => fresh_init(data, &task_config, fold)?,
            Some(prev) => transfer_trunk(
                &prev.outcome.checkpoint.params,
                data.space.len(),
                data.space.mode,
                derive_seed(config.seeds.init, data.task, fold),
            )?,
        };
        results.push(fit_fold(data, plan, fold, initial, &task_config)?);
    }
    Ok(results)
}

/// Task-dependent cross-validation over `tasks` (ordered T1 → T3) on one shared plan.
pub fn run_task_dependent(tasks: &[TaskData], plan: &FoldPlan, config: &TrainConfig) -> Result<Vec<CvOutcome>> {
    check_plan(config, plan)?;
    check_chain(tasks)?;
    if config.hidden.is_none() {
        return Err(Error::InvalidArgument("task-dependent training needs a trunk".into()));
    }
    let config = TrainConfig {
        strategy: Strategy::Dependent,
        ..config.clone()
    };
    let per_fold = (0..plan.k)
        .into_par_iter()
        .map(|fold| chain_fold(tasks, plan, &config, fold))
        .collect::<Result<Vec<_>>>()?;
    let mut by_task: Vec<Vec<FoldResult>> = (0..tasks.len()).map(|_| Vec::with_capacity(plan.k)).collect();
    for chain in per_fold {
        for (t, r) in chain.into_iter().enumerate() {
            by_task[t].push(r);
        }
    }
    Ok(tasks
        .iter()
        .zip(by_task)
        .map(|(data, results)| assemble(data, plan, &config.for_task(data.task), results))
        .collect())
}

/// Dispatches on `config.strategy`; both strategies use the same plan.
pub fn run_strategy(tasks: &[TaskData], plan: &FoldPlan, config: &TrainConfig) -> Result<Vec<CvOutcome>> {
    check_chain(tasks)?;
    match config.strategy {
        Strategy::Agnostic => tasks.iter().map(|data| run_cv(data, plan, config)).collect(),
        Strategy::Dependent => run_task_dependent(tasks, plan, config),
    }
}
