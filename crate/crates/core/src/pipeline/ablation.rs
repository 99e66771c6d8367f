use serde::{Deserialize, Serialize};

use crate::corpus::{FoldPlan, Mode, Task};
use crate::error::Result;

use super::cv::{run_strategy, CvReport};
use super::train::{Strategy, TrainConfig};
use super::TaskData;

/// Ablation variants. Each one removes a further component from the previous
/// row: `WithoutSw` drops both weightings, `WithoutTd` is the plain baseline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Variant {
    #[serde(rename = "full")]
    Full,
    #[serde(rename = "w/o cw")]
    WithoutCw,
    #[serde(rename = "w/o sw")]
    WithoutSw,
    #[serde(rename = "w/o td")]
    WithoutTd,
}

impl Variant {
    pub const ALL: [Variant; 4] = [Variant::Full, Variant::WithoutCw, Variant::WithoutSw, Variant::WithoutTd];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Full => "full",
            Variant::WithoutCw => "w/o cw",
            Variant::WithoutSw => "w/o sw",
            Variant::WithoutTd => "w/o td",
        }
    }

    pub fn configure(self, base: &TrainConfig) -> TrainConfig {
        let mut c = base.clone();
        c.class_weights = true;
        c.sample_weights = true;
        c.strategy = Strategy::Dependent;
        if self >= Variant::WithoutCw {
            c.class_weights = false;
        }
        if self >= Variant::WithoutSw {
            c.sample_weights = false;
        }
        if self >= Variant::WithoutTd {
            c.strategy = Strategy::Agnostic;
        }
        c
    }

    /// Class weights never apply to multilabel tasks, so that row is not applicable there.
    pub fn applies_to(self, task: Task) -> bool {
        self != Variant::WithoutCw || task.mode() == Mode::Multiclass
    }
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub variant: Variant,
    pub task: Task,
    pub report: CvReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationReport {
    pub k: usize,
    pub fold_seed: u64,
    pub tasks: Vec<Task>,
    pub rows: Vec<AblationRow>,
}

impl AblationReport {
    pub fn row(&self, variant: Variant, task: Task) -> Option<&AblationRow> {
        self.rows.iter().find(|r| r.variant == variant && r.task == task)
    }

    pub fn mean(&self, variant: Variant, task: Task) -> Option<f64> {
        self.row(variant, task).map(|r| r.report.mean)
    }

    /// Pooled out-of-fold recall of each class (multiclass tasks only).
    pub fn recall(&self, variant: Variant, task: Task) -> Option<Vec<f64>> {
        self.row(variant, task)?.report.confusion_total.as_ref().map(|m| m.recall())
    }
}

/// Runs every variant on the same fold plan and seeds.
pub fn run_ablation(tasks: &[TaskData], plan: &FoldPlan, base: &TrainConfig) -> Result<AblationReport> {
    let mut rows = Vec::new();
    for variant in Variant::ALL {
        let outcomes = run_strategy(tasks, plan, &variant.configure(base))?;
        for (data, outcome) in tasks.iter().zip(outcomes) {
            if variant.applies_to(data.task) {
                rows.push(AblationRow {
                    variant,
                    task: data.task,
                    report: outcome.report,
                });
            }
        }
    }
    Ok(AblationReport {
        k: plan.k,
        fold_seed: plan.seed,
        tasks: tasks.iter().map(|d| d.task).collect(),
        rows,
    })
}
