//! Cross-validated training, strategies, evaluation, ensembling and ablations.

mod ablation;
mod cv;
mod ensemble;
mod metrics;
pub(crate) mod report;
mod train;

use crate::corpus::{Corpus, LabelSpace, Task};
use crate::error::{Error, Result};
use crate::features::{FeatureVector, Featurizer};

pub use ablation::{run_ablation, AblationReport, AblationRow, Variant};
pub use cv::{
    run_chain_fold, run_cv, run_strategy, run_task_dependent, split_fold, CvOutcome, CvReport, FoldReport, Selection,
};
pub use ensemble::{ensemble_predict, ensemble_vote, select_top_k};
pub use metrics::{confusion_matrix, macro_f1, micro_f1, per_class_f1, ConfusionMatrix};
pub use report::{load_manifest, render_ablation, render_cv, write_run, Manifest, ManifestEntry};
pub use train::{
    derive_seed, evaluate, predict_indices, score, train_fold, FoldOutcome, Seeds, Strategy, TrainConfig,
};

/// Labeled units of one task with their features, in corpus order.
#[derive(Debug, Clone)]
pub struct TaskData {
    pub task: Task,
    pub space: LabelSpace,
    pub ids: Vec<String>,
    pub article_ids: Vec<String>,
    pub languages: Vec<String>,
    pub features: Vec<FeatureVector>,
    pub labels: Vec<Vec<usize>>,
}

impl TaskData {
    /// Collects the task's labeled units and featurizes them.
    pub fn build(corpus: &Corpus, task: Task, featurizer: &Featurizer) -> Result<Self> {
        let units = corpus.labeled_units(task);
        if units.is_empty() {
            return Err(Error::Validation(format!("corpus has no {task} labels")));
        }
        let space = corpus.label_space(task)?;
        let mut data = TaskData {
            task,
            ids: Vec::with_capacity(units.len()),
            article_ids: Vec::with_capacity(units.len()),
            languages: Vec::with_capacity(units.len()),
            features: Vec::with_capacity(units.len()),
            labels: Vec::with_capacity(units.len()),
            space,
        };
        for unit in units {
            let labels = unit
                .labels
                .as_deref()
                .unwrap_or_default()
                .iter()
                .map(|l| data.space.index_of(l))
                .collect::<Result<Vec<_>>>()?;
            data.features.push(featurizer.featurize(&unit)?);
            data.labels.push(labels);
            data.ids.push(unit.id);
            data.article_ids.push(unit.article_id);
            data.languages.push(unit.language);
        }
        Ok(data)
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features.first().map_or(0, |f| f.dim)
    }
}
