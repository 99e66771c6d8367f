//! Task metrics: macro-F1 for multiclass genre, micro-F1 for multilabel tasks,
//! and gold × predicted confusion matrices.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

fn check_lengths(preds: usize, golds: usize) -> Result<()> {
    if preds != golds {
        return Err(Error::InvalidArgument(format!(
            "{preds} predictions for {golds} gold labels"
        )));
    }
    Ok(())
}

fn f1(tp: usize, fp: usize, fn_: usize) -> f64 {
    let denom = 2 * tp + fp + fn_;
    if denom == 0 {
        0.0
    } else {
        2.0 * tp as f64 / denom as f64
    }
}

/// Per-class F1 scores. A class absent from both predictions and golds scores 0.
pub fn per_class_f1(preds: &[usize], golds: &[usize], label_count: usize) -> Result<Vec<f64>> {
    check_lengths(preds.len(), golds.len())?;
    let mut tp = vec![0usize; label_count];
    let mut fp = vec![0usize; label_count];
    let mut fn_ = vec![0usize; label_count];
    for (&p, &g) in preds.iter().zip(golds) {
        if p >= label_count || g >= label_count {
            return Err(Error::Validation(format!(
                "label index {} outside {label_count} labels",
                p.max(g)
            )));
        }
        if p == g {
            tp[p] += 1;
        } else {
            fp[p] += 1;
            fn_[g] += 1;
        }
    }
    Ok((0..label_count).map(|j| f1(tp[j], fp[j], fn_[j])).collect())
}

/// Unweighted mean of per-class F1 over all `label_count` classes.
pub fn macro_f1(preds: &[usize], golds: &[usize], label_count: usize) -> Result<f64> {
    if label_count == 0 {
        return Err(Error::InvalidArgument("macro-F1 over zero classes".into()));
    }
    let scores = per_class_f1(preds, golds, label_count)?;
    for j in 0..label_count {
        if !preds.contains(&j) && !golds.contains(&j) {
            log::warn!("class {j} absent from predictions and golds; counted as F1 = 0");
        }
    }
    Ok(scores.iter().sum::<f64>() / label_count as f64)
}

/// F1 from TP/FP/FN pooled over every (unit, label) pair. Labels equal to
/// `exclude` (the synthetic None class) are dropped from both sides.
pub fn micro_f1(pred_sets: &[Vec<usize>], gold_sets: &[Vec<usize>], exclude: Option<usize>) -> Result<f64> {
    check_lengths(pred_sets.len(), gold_sets.len())?;
    let (mut tp, mut fp, mut fn_) = (0usize, 0usize, 0usize);
    for (p, g) in pred_sets.iter().zip(gold_sets) {
        let p: BTreeSet<usize> = p.iter().copied().filter(|&j| Some(j) != exclude).collect();
        let g: BTreeSet<usize> = g.iter().copied().filter(|&j| Some(j) != exclude).collect();
        let hit = p.intersection(&g).count();
        tp += hit;
        fp += p.len() - hit;
        fn_ += g.len() - hit;
    }
    Ok(f1(tp, fp, fn_))
}

/// Square count matrix indexed `[gold][predicted]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub labels: Vec<String>,
    pub counts: Vec<Vec<usize>>,
}

impl ConfusionMatrix {
    pub fn zeros(labels: Vec<String>) -> Self {
        let n = labels.len();
        ConfusionMatrix {
            labels,
            counts: vec![vec![0; n]; n],
        }
    }

    pub fn total(&self) -> usize {
        self.counts.iter().flatten().sum()
    }

    pub fn add(&mut self, other: &ConfusionMatrix) {
        for (row, other_row) in self.counts.iter_mut().zip(&other.counts) {
            for (c, o) in row.iter_mut().zip(other_row) {
                *c += o;
            }
        }
    }

    /// Recall of each gold class; NaN-free (an empty row gives 0).
    pub fn recall(&self) -> Vec<f64> {
        self.counts
            .iter()
            .enumerate()
            .map(|(g, row)| {
                let total: usize = row.iter().sum();
                if total == 0 {
                    0.0
                } else {
                    row[g] as f64 / total as f64
                }
            })
            .collect()
    }
}

pub fn confusion_matrix(preds: &[usize], golds: &[usize], labels: &[String]) -> Result<ConfusionMatrix> {
    check_lengths(preds.len(), golds.len())?;
    let mut m = ConfusionMatrix::zeros(labels.to_vec());
    for (&p, &g) in preds.iter().zip(golds) {
        if p >= labels.len() || g >= labels.len() {
            return Err(Error::Validation(format!(
                "label index {} outside {} labels",
                p.max(g),
                labels.len()
            )));
        }
        m.counts[g][p] += 1;
    }
    Ok(m)
}
