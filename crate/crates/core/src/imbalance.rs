//! Countermeasures against skewed label distributions: loss-side class weights,
//! sampling-side per-sample weights with a weighted batch sampler, and
//! majority-class under-sampling.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{LabelSpace, Mode, Task};
use crate::error::{Error, Result};

/// Per-class loss multipliers `n / (c * n_j)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassWeights {
    pub task: Option<Task>,
    pub weights: Vec<f64>,
    /// Total sample count `n` and per-class counts `n_j`, kept so the exact
    /// rational weight `n / (c * n_j)` can be recovered.
    total: u64,
    counts: Vec<u64>,
}

pub fn class_weights(counts: &[usize]) -> Result<ClassWeights> {
    if counts.is_empty() {
        return Err(Error::InvalidArgument("class weights need at least one class".into()));
    }
    if let Some(j) = counts.iter().position(|&c| c == 0) {
        return Err(Error::InvalidArgument(format!("class {j} has no samples; its weight is undefined")));
    }
    let n: usize = counts.iter().sum();
    let c = counts.len() as f64;
    Ok(ClassWeights {
        task: None,
        weights: counts.iter().map(|&nj| n as f64 / (c * nj as f64)).collect(),
        total: n as u64,
        counts: counts.iter().map(|&x| x as u64).collect(),
    })
}

impl ClassWeights {
    pub fn for_space(space: &LabelSpace) -> Result<Self> {
        let mut w = class_weights(&space.counts)?;
        w.task = Some(space.task);
        Ok(w)
    }

    /// All-ones weights, equivalent to the unweighted loss.
    pub fn uniform(classes: usize) -> Self {
        ClassWeights {
            task: None,
            weights: vec![1.0; classes],
            total: classes as u64,
            counts: vec![1; classes],
        }
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Exact weight of class `j` as (numerator, denominator).
    pub fn ratio(&self, j: usize) -> (u64, u64) {
        (self.total, self.counts.len() as u64 * self.counts[j])
    }

    pub fn scaled(&self, factor: f64) -> Self {
        ClassWeights {
            weights: self.weights.iter().map(|w| w * factor).collect(),
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleWeights {
    pub weights: Vec<f64>,
}

/// Inverse class-frequency weight per sample. A multilabel sample takes the
/// weight of its rarest positive label, which reduces to the multiclass rule for
/// single-label samples.
pub fn sample_weights(labels: &[Vec<usize>], space: &LabelSpace) -> Result<SampleWeights> {
    let mut weights = Vec::with_capacity(labels.len());
    for (i, set) in labels.iter().enumerate() {
        if set.is_empty() {
            return Err(Error::InvalidArgument(format!("sample {i} has no label")));
        }
        if space.mode == Mode::Multiclass && set.len() != 1 {
            return Err(Error::InvalidArgument(format!("sample {i} has {} labels in a multiclass task", set.len())));
        }
        let mut rarest = usize::MAX;
        for &j in set {
            let count = *space.counts.get(j).ok_or_else(|| {
                Error::Validation(format!("sample {i}: label index {j} outside the {}-label space", space.len()))
            })?;
            if count == 0 {
                return Err(Error::Validation(format!(
                    "sample {i}: label {:?} has zero count",
                    space.labels[j]
                )));
            }
            rarest = rarest.min(count);
        }
        weights.push(1.0 / rarest as f64);
    }
    Ok(SampleWeights { weights })
}

/// Weighted random sampler: each epoch draws `epoch_length` indices with
/// replacement, P(i) = w_i / Σw, and chunks them into batches.
#[derive(Debug, Clone)]
pub struct BatchStream {
    pub seed: u64,
    pub batch_size: usize,
    pub epoch_length: usize,
    rng: ChaCha8Rng,
    dist: WeightedIndex<f64>,
}

pub fn weighted_batches(weights: &SampleWeights, batch_size: usize, seed: u64) -> Result<BatchStream> {
    if batch_size == 0 {
        return Err(Error::InvalidArgument("batch size must be at least 1".into()));
    }
    if weights.weights.is_empty() {
        return Err(Error::InvalidArgument("cannot sample from an empty dataset".into()));
    }
    if let Some(i) = weights.weights.iter().position(|w| !(w.is_finite() && *w > 0.0)) {
        return Err(Error::InvalidArgument(format!(
            "sample weight {i} is {}; weights must be finite and positive",
            weights.weights[i]
        )));
    }
    let dist = WeightedIndex::new(&weights.weights)
        .map_err(|e| Error::InvalidArgument(format!("invalid sample weights: {e}")))?;
    Ok(BatchStream {
        seed,
        batch_size,
        epoch_length: weights.weights.len(),
        rng: ChaCha8Rng::seed_from_u64(seed),
        dist,
    })
}

impl BatchStream {
    /// Scales the epoch length to `multiplier` times the dataset size (at least one draw).
    pub fn with_epoch_multiplier(mut self, multiplier: f64) -> Self {
        self.epoch_length = ((self.epoch_length as f64 * multiplier).round() as usize).max(1);
        self
    }

    pub fn draw(&mut self) -> usize {
        self.dist.sample(&mut self.rng)
    }

    pub fn next_epoch(&mut self) -> Vec<Vec<usize>> {
        let indices: Vec<usize> = (0..self.epoch_length).map(|_| self.draw()).collect();
        indices.chunks(self.batch_size).map(<[usize]>::to_vec).collect()
    }
}

/// Uniform shuffling without replacement: every index exactly once per epoch.
#[derive(Debug, Clone)]
pub struct ShuffledBatches {
    n: usize,
    batch_size: usize,
    rng: ChaCha8Rng,
}

impl ShuffledBatches {
    pub fn new(n: usize, batch_size: usize, seed: u64) -> Result<Self> {
        if batch_size == 0 || n == 0 {
            return Err(Error::InvalidArgument("shuffled batches need n ≥ 1 and batch size ≥ 1".into()));
        }
        Ok(ShuffledBatches {
            n,
            batch_size,
            rng: ChaCha8Rng::seed_from_u64(seed),
        })
    }

    pub fn next_epoch(&mut self) -> Vec<Vec<usize>> {
        let mut indices: Vec<usize> = (0..self.n).collect();
        indices.shuffle(&mut self.rng);
        indices.chunks(self.batch_size).map(<[usize]>::to_vec).collect()
    }
}

#[derive(Debug, Clone)]
pub enum Batcher {
    Weighted(BatchStream),
    Shuffled(ShuffledBatches),
}

impl Batcher {
    pub fn next_epoch(&mut self) -> Vec<Vec<usize>> {
        match self {
            Batcher::Weighted(b) => b.next_epoch(),
            Batcher::Shuffled(b) => b.next_epoch(),
        }
    }
}

/// Indices retained after down-sampling every class, without replacement, to
/// the minority-class count. The returned order is a seeded shuffle.
pub fn undersample_indices(classes: &[usize], n_classes: usize, seed: u64) -> Result<Vec<usize>> {
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); n_classes];
    for (i, &c) in classes.iter().enumerate() {
        by_class
            .get_mut(c)
            .ok_or_else(|| Error::Validation(format!("sample {i}: class {c} outside {n_classes} classes")))?
            .push(i);
    }
    if let Some(c) = by_class.iter().position(Vec::is_empty) {
        return Err(Error::InvalidArgument(format!("class {c} has no samples to balance against")));
    }
    let minority = by_class.iter().map(Vec::len).min().unwrap_or(0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut kept = Vec::with_capacity(minority * n_classes);
    for members in &mut by_class {
        members.shuffle(&mut rng);
        kept.extend_from_slice(&members[..minority]);
    }
    kept.shuffle(&mut rng);
    Ok(kept)
}

/// Under-sampling for a multiclass dataset given as one label-index set per sample.
pub fn undersample(labels: &[Vec<usize>], space: &LabelSpace, seed: u64) -> Result<Vec<usize>> {
    if space.mode != Mode::Multiclass {
        return Err(Error::InvalidArgument(format!(
            "under-sampling needs a multiclass task; {} is {}",
            space.task, space.mode
        )));
    }
    let classes: Vec<usize> = labels
        .iter()
        .enumerate()
        .map(|(i, set)| match set.as_slice() {
            [c] => Ok(*c),
            _ => Err(Error::InvalidArgument(format!("sample {i} is not single-label"))),
        })
        .collect::<Result<_>>()?;
    undersample_indices(&classes, space.len(), seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn space(task: Task, counts: &[usize]) -> LabelSpace {
        LabelSpace {
            task,
            labels: (0..counts.len()).map(|i| format!("l{i}")).collect(),
            mode: task.mode(),
            counts: counts.to_vec(),
        }
    }

    #[test]
    fn genre_counts() {
        let w = class_weights(&[269, 878, 87]).unwrap();
        let expected = [1234.0 / (3.0 * 269.0), 1234.0 / (3.0 * 878.0), 1234.0 / (3.0 * 87.0)];
        for (a, b) in w.weights.iter().zip(expected) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!((w.weights[0] - 1.52912).abs() < 1e-5);
        assert!((w.weights[1] - 0.46849).abs() < 1e-5);
        assert!((w.weights[2] - 4.72797).abs() < 1e-5);
    }

    #[test]
    fn balanced_and_small_cases() {
        assert_eq!(class_weights(&[10, 10]).unwrap().weights, vec![1.0, 1.0]);
        let w = class_weights(&[1, 3]).unwrap();
        assert_eq!(w.weights[0], 2.0);
        assert!((w.weights[1] - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(w.ratio(1), (4, 6));
    }

    #[test]
    fn zero_count_rejected() {
        assert!(class_weights(&[3, 0]).is_err());
        assert!(class_weights(&[]).is_err());
    }

    #[test]
    fn multiclass_sample_weights() {
        let s = space(Task::T1, &[3, 1]);
        let w = sample_weights(&[vec![0], vec![0], vec![0], vec![1]], &s).unwrap();
        assert_eq!(w.weights, vec![1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0, 1.0]);
        // resampled class mass 3 * 1/3 : 1 * 1 = 1 : 1
        let mass0: f64 = w.weights[..3].iter().sum();
        assert!((mass0 - w.weights[3]).abs() < 1e-15);
    }

    #[test]
    fn multilabel_uses_rarest_label() {
        let s = space(Task::T2, &[100, 2]);
        let w = sample_weights(&[vec![0, 1], vec![0]], &s).unwrap();
        assert_eq!(w.weights, vec![0.5, 0.01]);
    }

    #[test]
    fn sample_weight_errors() {
        let s = space(Task::T1, &[2, 2]);
        assert!(sample_weights(&[vec![5]], &s).is_err());
        assert!(sample_weights(&[vec![]], &s).is_err());
    }

    #[test]
    fn batches_cover_epoch() {
        let w = SampleWeights { weights: vec![1.0; 4] };
        let mut b = weighted_batches(&w, 2, 0).unwrap();
        let epoch = b.next_epoch();
        assert_eq!(epoch.len(), 2);
        assert!(epoch.iter().all(|batch| batch.len() == 2 && batch.iter().all(|&i| i < 4)));
        let w = SampleWeights { weights: vec![1.0; 5] };
        let epoch = weighted_batches(&w, 2, 0).unwrap().next_epoch();
        assert_eq!(epoch.iter().map(Vec::len).collect::<Vec<_>>(), vec![2, 2, 1]);
    }

    #[test]
    fn batches_reject_bad_weights() {
        assert!(weighted_batches(&SampleWeights { weights: vec![1.0, 0.0] }, 2, 0).is_err());
        assert!(weighted_batches(&SampleWeights { weights: vec![1.0, -1.0] }, 2, 0).is_err());
        assert!(weighted_batches(&SampleWeights { weights: vec![1.0] }, 0, 0).is_err());
        assert!(weighted_batches(&SampleWeights { weights: vec![] }, 1, 0).is_err());
    }

    #[test]
    fn batches_deterministic() {
        let w = SampleWeights { weights: vec![1.0, 2.0, 3.0] };
        let a = weighted_batches(&w, 2, 11).unwrap().next_epoch();
        let b = weighted_batches(&w, 2, 11).unwrap().next_epoch();
        assert_eq!(a, b);
    }

    #[test]
    fn epoch_multiplier() {
        let w = SampleWeights { weights: vec![1.0; 10] };
        let mut b = weighted_batches(&w, 4, 0).unwrap().with_epoch_multiplier(2.0);
        assert_eq!(b.next_epoch().iter().map(Vec::len).sum::<usize>(), 20);
    }

    #[test]
    fn shuffled_batches_are_permutations() {
        let mut b = ShuffledBatches::new(7, 3, 1).unwrap();
        let mut all: Vec<usize> = b.next_epoch().concat();
        all.sort_unstable();
        assert_eq!(all, (0..7).collect::<Vec<_>>());
    }

    #[test]
    fn undersample_genre_counts() {
        let mut labels = Vec::new();
        for (c, &n) in [269usize, 878, 87].iter().enumerate() {
            labels.extend(std::iter::repeat_n(vec![c], n));
        }
        let s = space(Task::T1, &[269, 878, 87]);
        let kept = undersample(&labels, &s, 5).unwrap();
        let mut counts = [0usize; 3];
        for &i in &kept {
            counts[labels[i][0]] += 1;
        }
        assert_eq!(counts, [87, 87, 87]);
        assert_eq!(kept, undersample(&labels, &s, 5).unwrap());
    }

    #[test]
    fn undersample_balanced_is_fixed_point() {
        let labels: Vec<Vec<usize>> = (0..10).map(|i| vec![i % 2]).collect();
        let s = space(Task::T1, &[5, 5]);
        let mut kept = undersample(&labels, &s, 3).unwrap();
        kept.sort_unstable();
        assert_eq!(kept, (0..10).collect::<Vec<_>>());
    }

    #[test]
    fn undersample_rejects_multilabel() {
        let s = space(Task::T2, &[1, 1]);
        assert!(undersample(&[vec![0], vec![1]], &s, 0).is_err());
    }

    proptest! {
        #[test]
        fn undersample_equalises(counts in prop::collection::vec(1usize..30, 1..5), seed: u64) {
            let classes: Vec<usize> = counts.iter().enumerate().flat_map(|(c, &n)| std::iter::repeat_n(c, n)).collect();
            let kept = undersample_indices(&classes, counts.len(), seed).unwrap();
            let min = *counts.iter().min().unwrap();
            let mut got = vec![0usize; counts.len()];
            for &i in &kept { got[classes[i]] += 1; }
            prop_assert!(got.iter().all(|&g| g == min));
            let mut sorted = kept.clone();
            sorted.sort_unstable();
            sorted.dedup();
            prop_assert_eq!(sorted.len(), kept.len());
        }

        #[test]
        fn balanced_weights_are_ones(c in 1usize..10, n in 1usize..100) {
            let w = class_weights(&vec![n; c]).unwrap();
            prop_assert!(w.weights.iter().all(|&x| x == 1.0));
        }
    }
}
