use crate::error::{Error, Result};
use crate::features::FeatureVector;
use crate::corpus::Mode;
use crate::model::{argmax, decide, forward, Decision, ModelCheckpoint, PredictionVector};

/// The `k` checkpoints with the highest validation score; ties go to the lower fold.
pub fn select_top_k(checkpoints: &[ModelCheckpoint], k: usize) -> Result<Vec<ModelCheckpoint>> {
    if k == 0 || checkpoints.len() < k {
        return Err(Error::InvalidArgument(format!(
            "cannot select {k} models from a pool of {}",
            checkpoints.len()
        )));
    }
    let mut ranked: Vec<&ModelCheckpoint> = checkpoints.iter().collect();
    ranked.sort_by(|a, b| {
        b.provenance
            .validation_score
            .total_cmp(&a.provenance.validation_score)
            .then(a.provenance.fold.cmp(&b.provenance.fold))
    });
    Ok(ranked.into_iter().take(k).cloned().collect())
}

/// Majority vote over three prediction vectors.
///
/// Multiclass: the label chosen by at least two models, otherwise the label with
/// the highest mean probability. Multilabel: every label chosen by at least two.
pub fn ensemble_vote(preds: &[PredictionVector], threshold: f64, none_label: Option<usize>) -> Result<Decision> {
    if preds.len() != 3 {
        return Err(Error::InvalidArgument(format!("ensemble needs exactly 3 models, got {}", preds.len())));
    }
    let mode = preds[0].mode;
    let width = preds[0].probs.len();
    if preds.iter().any(|p| p.mode != mode) {
        return Err(Error::InvalidArgument("ensemble members disagree on mode".into()));
    }
    if preds.iter().any(|p| p.probs.len() != width) {
        return Err(Error::InvalidArgument("ensemble members disagree on label count".into()));
    }
    let mut votes = vec![0usize; width];
    for p in preds {
        for j in decide(p, threshold, none_label).as_set() {
            votes[j] += 1;
        }
    }
    Ok(match mode {
        Mode::Multiclass => match votes.iter().position(|&v| v >= 2) {
            Some(j) => Decision::Label(j),
            None => {
                let mean: Vec<f64> = (0..width)
                    .map(|j| preds.iter().map(|p| p.probs[j]).sum::<f64>() / 3.0)
                    .collect();
                Decision::Label(argmax(&mean))
            }
        },
        Mode::Multilabel => Decision::Labels((0..width).filter(|&j| votes[j] >= 2).collect()),
    })
}

/// Runs the three checkpoints on `x` and combines them with [`ensemble_vote`].
pub fn ensemble_predict(models: &[ModelCheckpoint], x: &FeatureVector, threshold: f64) -> Result<Decision> {
    if models.len() != 3 {
        return Err(Error::InvalidArgument(format!("ensemble needs exactly 3 models, got {}", models.len())));
    }
    let first = &models[0];
    for m in &models[1..] {
        if m.params.mode != first.params.mode {
            return Err(Error::InvalidArgument("ensemble members disagree on mode".into()));
        }
        if m.params.dim_in() != first.params.dim_in() {
            return Err(Error::DimensionMismatch {
                expected: first.params.dim_in(),
                got: m.params.dim_in(),
            });
        }
        if m.labels != first.labels || m.provenance.task != first.provenance.task {
            return Err(Error::InvalidArgument("ensemble members were trained on different label spaces".into()));
        }
    }
    let preds = models
        .iter()
        .map(|m| forward(&m.params, x))
        .collect::<Result<Vec<_>>>()?;
    ensemble_vote(&preds, threshold, first.none_label)
}
