#![allow(dead_code)]

use imbaltext::corpus::{Corpus, LabelSpace, Mode, Task};
use imbaltext::features::{FeatureSource, FeatureVector, Featurizer};
use imbaltext::imbalance::{class_weights, ClassWeights};
use imbaltext::model::{bce_loss, forward, init_model, weighted_ce_loss, Gradients, ModelParams, Target};
use imbaltext::pipeline::TaskData;
use imbaltext::synth::{generate, SynthConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// One random (model, input, target, class weights) gradient-check case.
#[derive(Debug, Clone)]
pub struct Instance {
    pub params: ModelParams,
    pub x: FeatureVector,
    pub target: Target,
    pub cw: ClassWeights,
}

impl Instance {
    pub fn loss_with(&self, params: &ModelParams) -> f64 {
        let pred = forward(params, &self.x).unwrap();
        match params.mode {
            Mode::Multiclass => weighted_ce_loss(&pred, &self.target, &self.cw).unwrap().loss,
            Mode::Multilabel => bce_loss(&pred, &self.target).unwrap().loss,
        }
    }

    pub fn loss(&self) -> f64 {
        self.loss_with(&self.params)
    }

    pub fn analytic(&self) -> Gradients {
        let trace = self.params.trace(&self.x).unwrap();
        let lg = match self.params.mode {
            Mode::Multiclass => weighted_ce_loss(&trace.prediction, &self.target, &self.cw).unwrap(),
            Mode::Multilabel => bce_loss(&trace.prediction, &self.target).unwrap(),
        };
        let mut grads = Gradients::zeros_like(&self.params);
        self.params.backward(&self.x, &trace, &lg.grad, 1.0, &mut grads);
        grads
    }

    /// Largest relative error between analytic and central-difference gradients.
    /// The denominator is floored at 1e-6 so vanishing gradients compare absolutely.
    pub fn max_rel_error(&self, h: f64) -> f64 {
        let analytic = self.analytic();
        let mut worst = 0.0f64;
        for (t, tensor) in analytic.tensors.iter().enumerate() {
            for (e, &a) in tensor.iter().enumerate() {
                let mut plus = self.params.clone();
                plus.tensors_mut()[t].0[e] += h;
                let mut minus = self.params.clone();
                minus.tensors_mut()[t].0[e] -= h;
                let numeric = (self.loss_with(&plus) - self.loss_with(&minus)) / (2.0 * h);
                let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-6);
                worst = worst.max(rel);
            }
        }
        worst
    }

    /// Smallest |pre-activation| of the trunk; ReLU is not differentiable at 0.
    pub fn min_hidden_margin(&self) -> f64 {
        let Some(trunk) = &self.params.trunk else {
            return f64::INFINITY;
        };
        let x = self.x.to_dense();
        let h = trunk.layer.dim_out;
        (0..h)
            .map(|k| {
                let pre: f64 = trunk.layer.bias[k] + x.iter().enumerate().map(|(i, xi)| xi * trunk.layer.weights[i * h + k]).sum::<f64>();
                pre.abs()
            })
            .fold(f64::INFINITY, f64::min)
    }
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(rand_distr::StandardNormal)
}

/// Random gradient-check instance. Cases with a trunk pre-activation within
/// `1e-3` of the ReLU kink are redrawn.
pub fn random_instance(rng: &mut ChaCha8Rng, with_trunk: bool, mode: Mode) -> Instance {
    loop {
        let dim_in = rng.random_range(2..8);
        let labels = rng.random_range(2..6);
        let hidden = with_trunk.then(|| rng.random_range(1..7));
        let mut params = init_model(dim_in, hidden, labels, mode, rng.random()).unwrap();
        for (tensor, is_weight) in params.tensors_mut() {
            for v in tensor.iter_mut() {
                if is_weight {
                    *v *= 1.5;
                } else {
                    *v = 0.5 * normal(rng);
                }
            }
        }
        let x = if rng.random_bool(0.5) {
            FeatureVector::dense((0..dim_in).map(|_| normal(rng)).collect(), FeatureSource::Embedding)
        } else {
            let mut entries = Vec::new();
            for i in 0..dim_in {
                if rng.random_bool(0.6) {
                    entries.push((i, rng.random_range(0.05..1.0)));
                }
            }
            FeatureVector::sparse(dim_in, entries, FeatureSource::Tfidf)
        };
        let target = match mode {
            Mode::Multiclass => Target::one_hot(labels, rng.random_range(0..labels)),
            Mode::Multilabel => {
                let set: Vec<usize> = (0..labels).filter(|_| rng.random_bool(0.4)).collect();
                Target::multi_hot(labels, &set)
            }
        };
        let counts: Vec<usize> = (0..labels).map(|_| rng.random_range(1..1000)).collect();
        let inst = Instance {
            params,
            x,
            target,
            cw: class_weights(&counts).unwrap(),
        };
        if inst.min_hidden_margin() > 1e-3 {
            return inst;
        }
    }
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// In-memory task data with one unit per article.
pub fn toy_data(task: Task, names: &[&str], features: Vec<Vec<f64>>, labels: Vec<Vec<usize>>) -> TaskData {
    let names: Vec<String> = names.iter().map(|s| s.to_string()).collect();
    let sets: Vec<Vec<String>> = labels.iter().map(|s| s.iter().map(|&j| names[j].clone()).collect()).collect();
    let space = LabelSpace::with_labels(task, names, sets.iter().map(Vec::as_slice)).unwrap();
    let n = features.len();
    TaskData {
        task,
        space,
        ids: (0..n).map(|i| format!("u{i:04}")).collect(),
        article_ids: (0..n).map(|i| format!("u{i:04}")).collect(),
        languages: (0..n).map(|i| if i % 2 == 0 { "en" } else { "it" }.to_string()).collect(),
        features: features.into_iter().map(|v| FeatureVector::dense(v, FeatureSource::Embedding)).collect(),
        labels,
    }
}

/// Synthetic corpus, embedding featurizer and task data for `tasks`.
pub fn synth_tasks(config: &SynthConfig, tasks: &[Task]) -> (Corpus, Featurizer, Vec<TaskData>) {
    let fixture = generate(config).unwrap();
    let corpus = fixture.corpus().unwrap();
    let featurizer = Featurizer::Embeddings(fixture.embedding_table());
    let data = tasks.iter().map(|&t| TaskData::build(&corpus, t, &featurizer).unwrap()).collect();
    (corpus, featurizer, data)
}
