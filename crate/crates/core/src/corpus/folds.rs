use std::collections::{BTreeMap, HashMap};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Corpus, LabelSpace, Mode, Task};
use crate::error::{Error, Result};

/// Deterministic article-id → fold assignment. Paragraph units inherit the fold
/// of their article, so one plan serves all three tasks.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub task: Task,
    pub k: usize,
    pub seed: u64,
    pub assignment: BTreeMap<String, usize>,
}

impl FoldPlan {
    pub fn fold_of(&self, article_id: &str) -> Option<usize> {
        self.assignment.get(article_id).copied()
    }

    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &f in self.assignment.values() {
            sizes[f] += 1;
        }
        sizes
    }

    /// Article ids of each fold, sorted.
    pub fn folds(&self) -> Vec<Vec<String>> {
        let mut folds = vec![Vec::new(); self.k];
        for (id, &f) in &self.assignment {
            folds[f].push(id.clone());
        }
        folds
    }
}

/// Stratified k-fold plan over the articles labeled for `task`.
///
/// T1 stratifies by genre. T2/T3 stratify by each article's rarest positive
/// label (ties broken lexicographically); for T3 an article's labels are the
/// union over its paragraphs.
pub fn plan_folds(corpus: &Corpus, task: Task, k: usize, seed: u64) -> Result<FoldPlan> {
    let space = corpus.label_space(task)?;
    plan_folds_with_space(corpus, &space, k, seed)
}

pub fn plan_folds_with_space(corpus: &Corpus, space: &LabelSpace, k: usize, seed: u64) -> Result<FoldPlan> {
    if k < 2 {
        return Err(Error::InvalidArgument(format!("fold count must be at least 2, got {k}")));
    }
    if let Some(j) = space.counts.iter().position(|&c| c == 0) {
        return Err(Error::InvalidArgument(format!(
            "label {:?} of {} has no samples",
            space.labels[j], space.task
        )));
    }
    let task = space.task;
    let index: HashMap<&str, usize> = space
        .labels
        .iter()
        .enumerate()
        .map(|(i, l)| (l.as_str(), i))
        .collect();
    let lookup = |l: &str| {
        index
            .get(l)
            .copied()
            .ok_or_else(|| Error::Validation(format!("label {l:?} not in {task} label space")))
    };

    // Stratum key per labeled article; usize::MAX holds articles with an empty label set.
    let mut strata: BTreeMap<usize, Vec<&str>> = BTreeMap::new();
    for doc in &corpus.documents {
        let positives: Vec<usize> = match task {
            Task::T1 => match &doc.labels_t1 {
                Some(l) => vec![lookup(l)?],
                None => continue,
            },
            Task::T2 => match &doc.labels_t2 {
                Some(ls) => ls.iter().map(|l| lookup(l)).collect::<Result<_>>()?,
                None => continue,
            },
            Task::T3 => {
                if !doc.has_labels(Task::T3) {
                    continue;
                }
                let mut all = Vec::new();
                for p in &doc.paragraphs {
                    for l in p.labels_t3.iter().flatten() {
                        all.push(lookup(l)?);
                    }
                }
                all
            }
        };
        let key = match space.mode {
            Mode::Multiclass => positives[0],
            Mode::Multilabel => positives
                .iter()
                .copied()
                .min_by_key(|&j| (space.counts[j], j))
                .unwrap_or(usize::MAX),
        };
        strata.entry(key).or_default().push(doc.id.as_str());
    }

    let n: usize = strata.values().map(Vec::len).sum();
    if k > n {
        return Err(Error::InvalidArgument(format!(
            "fold count {k} exceeds the {n} labeled {task} articles"
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut assignment = BTreeMap::new();
    let mut position = 0usize;
    for ids in strata.values_mut() {
        ids.shuffle(&mut rng);
        for id in ids.iter() {
            assignment.insert(id.to_string(), position % k);
            position += 1;
        }
    }
    Ok(FoldPlan {
        task,
        k,
        seed,
        assignment,
    })
}
