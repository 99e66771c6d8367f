use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::corpus::Task;
use crate::error::{Error, Result};
use crate::model::ModelCheckpoint;

use super::ablation::{AblationReport, Variant};
use super::cv::{CvOutcome, CvReport, Selection};
use super::metrics::ConfusionMatrix;

const MANIFEST: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub task: Task,
    pub fold: usize,
    /// Checkpoint path relative to the run directory.
    pub path: PathBuf,
    pub validation_score: f64,
    pub score: f64,
    pub best_epoch: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub entries: Vec<ManifestEntry>,
}

impl Manifest {
    pub fn tasks(&self) -> Vec<Task> {
        let mut tasks: Vec<Task> = self.entries.iter().map(|e| e.task).collect();
        tasks.dedup();
        tasks
    }

    /// Loads every checkpoint of `task`, in fold order.
    pub fn checkpoints(&self, run_dir: &Path, task: Task) -> Result<Vec<ModelCheckpoint>> {
        self.entries
            .iter()
            .filter(|e| e.task == task)
            .map(|e| ModelCheckpoint::load(&run_dir.join(&e.path)))
            .collect()
    }
}

pub fn load_manifest(run_dir: &Path) -> Result<Manifest> {
    let path = run_dir.join(MANIFEST);
    let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
    Ok(serde_json::from_slice(&bytes)?)
}

pub(crate) fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Writes `<run>/<task>/<fold>/best.ckpt` for every fold, `manifest.json`,
/// `report.json` and `report.txt`.
pub fn write_run(run_dir: &Path, outcomes: &[CvOutcome]) -> Result<Manifest> {
    fs::create_dir_all(run_dir).map_err(|e| Error::io(run_dir, e))?;
    let mut entries = Vec::new();
    for outcome in outcomes {
        for (ckpt, fold) in outcome.checkpoints.iter().zip(&outcome.report.folds) {
            let rel = PathBuf::from(outcome.report.task.to_string())
                .join(fold.fold.to_string())
                .join("best.ckpt");
            ckpt.save(&run_dir.join(&rel))?;
            entries.push(ManifestEntry {
                task: outcome.report.task,
                fold: fold.fold,
                path: rel,
                validation_score: ckpt.provenance.validation_score,
                score: fold.score,
                best_epoch: fold.best_epoch,
            });
        }
    }
    let manifest = Manifest { entries };
    write_json(&run_dir.join(MANIFEST), &manifest)?;
    let reports: Vec<&CvReport> = outcomes.iter().map(|o| &o.report).collect();
    write_json(&run_dir.join("report.json"), &reports)?;
    let text = render_cv(&reports);
    let path = run_dir.join("report.txt");
    fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    Ok(manifest)
}

fn table(rows: &[Vec<String>]) -> String {
    let cols = rows.iter().map(Vec::len).max().unwrap_or(0);
    let widths: Vec<usize> = (0..cols)
        .map(|c| rows.iter().filter_map(|r| r.get(c)).map(|s| s.chars().count()).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    for row in rows {
        let line: Vec<String> = row
            .iter()
            .enumerate()
            .map(|(c, s)| format!("{s:<w$}", w = widths[c]))
            .collect();
        out.push_str(line.join("  ").trim_end());
        out.push('\n');
    }
    out
}

fn render_confusion(m: &ConfusionMatrix) -> String {
    let mut rows = vec![std::iter::once("gold \\ pred".to_string()).chain(m.labels.iter().cloned()).collect::<Vec<_>>()];
    for (label, counts) in m.labels.iter().zip(&m.counts) {
        rows.push(std::iter::once(label.clone()).chain(counts.iter().map(usize::to_string)).collect());
    }
    table(&rows)
}

fn f4(x: f64) -> String {
    format!("{x:.4}")
}

pub fn render_cv(reports: &[&CvReport]) -> String {
    let mut out = String::new();
    for (i, r) in reports.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        out.push_str(&format!(
            "{} ({}, {} strategy, {} folds)\n",
            r.task,
            r.metric,
            match r.strategy {
                super::Strategy::Agnostic => "agnostic",
                super::Strategy::Dependent => "dependent",
            },
            r.k
        ));
        match r.selection {
            Selection::TestFold => {
                out.push_str("best epoch chosen on the evaluation fold itself; scores are optimistic\n")
            }
            Selection::InnerValidation => out.push_str("best epoch chosen on an inner validation split\n"),
        }
        let mut rows = vec![["fold", "score", "selection", "best_epoch", "epochs", "train", "eval"]
            .iter()
            .map(|s| s.to_string())
            .collect::<Vec<_>>()];
        for f in &r.folds {
            rows.push(vec![
                f.fold.to_string(),
                f4(f.score),
                f4(f.selection_score),
                f.best_epoch.to_string(),
                f.epochs_trained.to_string(),
                f.train_size.to_string(),
                f.eval_size.to_string(),
            ]);
        }
        rows.push(vec!["mean".into(), f4(r.mean)]);
        out.push_str(&table(&rows));
        if r.excluded_units > 0 {
            out.push_str(&format!("{} labeled units outside the fold plan were skipped\n", r.excluded_units));
        }
        if let Some(m) = &r.confusion_total {
            out.push_str("confusion matrix, all folds\n");
            out.push_str(&render_confusion(m));
            let recall = m.recall();
            let rows: Vec<Vec<String>> = m
                .labels
                .iter()
                .zip(&recall)
                .map(|(l, x)| vec![format!("recall {l}"), f4(*x)])
                .collect();
            out.push_str(&table(&rows));
        }
        if let Some(langs) = &r.by_language {
            out.push_str("by language\n");
            let rows: Vec<Vec<String>> = langs.iter().map(|(l, s)| vec![l.clone(), f4(*s)]).collect();
            out.push_str(&table(&rows));
        }
    }
    out
}

pub fn render_ablation(report: &AblationReport) -> String {
    let mut rows = vec![std::iter::once("variant".to_string())
        .chain(report.tasks.iter().map(Task::to_string))
        .collect::<Vec<_>>()];
    for variant in Variant::ALL {
        let mut row = vec![variant.name().to_string()];
        for &task in &report.tasks {
            row.push(report.mean(variant, task).map_or_else(|| "n/a".to_string(), f4));
        }
        rows.push(row);
    }
    let mut out = format!("ablation over {} folds (fold seed {})\n", report.k, report.fold_seed);
    out.push_str(&table(&rows));
    for row in &report.rows {
        if let Some(m) = &row.report.confusion_total {
            out.push_str(&format!("\n{} {} confusion matrix, all folds\n", row.variant, row.task));
            out.push_str(&render_confusion(m));
        }
    }
    out
}
