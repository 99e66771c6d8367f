mod common;

use std::collections::{BTreeMap, HashSet};

use imbaltext::corpus::{plan_folds, FoldPlan, Mode, Task};
use imbaltext::model::{init_model, AdamWConfig};
use imbaltext::pipeline::{
    ensemble_predict, run_ablation, run_cv, run_strategy, run_task_dependent, select_top_k, split_fold, train_fold,
    Seeds, Selection, Strategy, TrainConfig, Variant,
};
use imbaltext::synth::SynthConfig;
use rand::Rng;

fn config(lr: f64) -> TrainConfig {
    TrainConfig {
        optimizer: AdamWConfig {
            lr,
            ..AdamWConfig::default()
        },
        hidden: Some(8),
        ..TrainConfig::default()
    }
}

/// Two Gaussian blobs far apart along the first coordinate.
fn separable(n: usize, seed: u64) -> imbaltext::pipeline::TaskData {
    let mut rng = common::rng(seed);
    let mut features = Vec::new();
    let mut labels = Vec::new();
    for i in 0..n {
        let y = i % 2;
        let centre = if y == 0 { -3.0 } else { 3.0 };
        features.push(vec![centre + rng.random_range(-0.5..0.5), rng.random_range(-1.0..1.0)]);
        labels.push(vec![y]);
    }
    common::toy_data(Task::T1, &["a", "b"], features, labels)
}

fn plan_of(data: &imbaltext::pipeline::TaskData, k: usize) -> FoldPlan {
    FoldPlan {
        task: data.task,
        k,
        seed: 0,
        assignment: data.article_ids.iter().enumerate().map(|(i, a)| (a.clone(), i % k)).collect(),
    }
}

#[test]
fn separable_toy_reaches_perfect_score_and_stops_early() {
    let data = separable(40, 1);
    let train: Vec<usize> = (0..30).collect();
    let eval: Vec<usize> = (30..40).collect();
    let initial = init_model(2, Some(8), 2, Mode::Multiclass, 3).unwrap();
    let out = train_fold(&data, &train, &eval, initial, &config(0.05), 0).unwrap();
    assert_eq!(out.checkpoint.provenance.validation_score, 1.0);
    assert!(out.epochs_trained < 30, "trained {} epochs", out.epochs_trained);
}

#[test]
fn patience_zero_trains_one_epoch() {
    let data = separable(20, 2);
    let initial = init_model(2, Some(8), 2, Mode::Multiclass, 3).unwrap();
    let cfg = TrainConfig {
        patience: 0,
        ..config(0.01)
    };
    let out = train_fold(&data, &(0..14).collect::<Vec<_>>(), &(14..20).collect::<Vec<_>>(), initial, &cfg, 0).unwrap();
    assert_eq!(out.epochs_trained, 1);
    assert_eq!(out.checkpoint.provenance.epoch, 1);
}

#[test]
fn repeated_training_is_bitwise_identical() {
    let data = separable(30, 3);
    let run = || {
        let initial = init_model(2, Some(8), 2, Mode::Multiclass, 7).unwrap();
        train_fold(&data, &(0..20).collect::<Vec<_>>(), &(20..30).collect::<Vec<_>>(), initial, &config(0.01), 4)
            .unwrap()
            .checkpoint
            .to_bytes()
            .unwrap()
    };
    assert_eq!(run(), run());
}

#[test]
fn bad_splits_are_rejected() {
    let data = separable(10, 4);
    let initial = init_model(2, Some(8), 2, Mode::Multiclass, 7).unwrap();
    assert!(train_fold(&data, &[], &[1, 2], initial.clone(), &config(0.01), 0).is_err());
    assert!(train_fold(&data, &[0, 1], &[], initial.clone(), &config(0.01), 0).is_err());
    assert!(train_fold(&data, &[0, 1, 2], &[2, 3], initial, &config(0.01), 0).is_err());
}

#[test]
fn class_weights_rejected_for_multilabel() {
    let data = common::toy_data(
        Task::T2,
        &["x", "y"],
        vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 1.0], vec![0.5, 0.5]],
        vec![vec![0], vec![1], vec![0, 1], vec![0]],
    );
    let initial = init_model(2, Some(4), 2, Mode::Multilabel, 1).unwrap();
    let err = train_fold(&data, &[0, 1], &[2, 3], initial.clone(), &config(0.01), 0);
    assert!(err.is_err());
    let cfg = config(0.01).for_task(Task::T2);
    assert!(!cfg.class_weights);
    assert!(train_fold(&data, &[0, 1], &[2, 3], initial, &cfg, 0).is_ok());
}

#[test]
fn early_stopping_keeps_the_best_epoch() {
    let data = separable(40, 5);
    let initial = init_model(2, Some(8), 2, Mode::Multiclass, 9).unwrap();
    let cfg = TrainConfig {
        patience: 3,
        ..config(0.003)
    };
    let out = train_fold(&data, &(0..30).collect::<Vec<_>>(), &(30..40).collect::<Vec<_>>(), initial, &cfg, 0).unwrap();
    let best = out.epoch_scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    assert_eq!(out.checkpoint.provenance.validation_score, best);
    let first_best = out.epoch_scores.iter().position(|&s| s == best).unwrap() + 1;
    assert_eq!(out.checkpoint.provenance.epoch, first_best);
    assert!(out.epochs_trained <= first_best + cfg.patience);
}

#[test]
fn two_fold_cv_averages_fold_scores() {
    let data = separable(4, 6);
    let mut plan = plan_of(&data, 2);
    // units alternate classes, so pair them up to keep both classes in every fold
    for (i, a) in data.article_ids.iter().enumerate() {
        plan.assignment.insert(a.clone(), i / 2);
    }
    let cfg = TrainConfig {
        k: 2,
        ..config(0.05)
    };
    let out = run_cv(&data, &plan, &cfg).unwrap();
    assert_eq!(out.report.folds.len(), 2);
    let scores = out.report.fold_scores();
    assert_eq!(out.report.mean, (scores[0] + scores[1]) / 2.0);
    assert_eq!(out.checkpoints.len(), 2);
}

#[test]
fn perfect_classifier_fixture_scores_one() {
    let data = separable(60, 7);
    let cfg = TrainConfig {
        k: 3,
        ..config(0.05)
    };
    let out = run_cv(&data, &plan_of(&data, 3), &cfg).unwrap();
    assert_eq!(out.report.mean, 1.0);
    let m = out.report.confusion_total.unwrap();
    assert_eq!(m.total(), 60);
    assert_eq!(m.counts, vec![vec![30, 0], vec![0, 30]]);
    assert_eq!(out.report.selection, Selection::TestFold);
}

fn small_synth() -> SynthConfig {
    SynthConfig {
        n: 150,
        ratio: vec![3, 2, 1],
        dim: 8,
        seed: 11,
        ..SynthConfig::default()
    }
}

fn small_config(k: usize) -> TrainConfig {
    TrainConfig {
        k,
        epochs_max: 4,
        patience: 2,
        seeds: Seeds::all(5),
        ..config(3e-3)
    }
}

#[test]
fn folds_never_leak_units_or_split_articles() {
    let (corpus, _, tasks) = common::synth_tasks(&small_synth(), &Task::ALL);
    let plan = plan_folds(&corpus, Task::T1, 5, 3).unwrap();
    for data in &tasks {
        let mut seen_eval = HashSet::new();
        for fold in 0..plan.k {
            let (train, eval, excluded) = split_fold(data, &plan, fold);
            assert_eq!(excluded, 0);
            let train_ids: HashSet<&str> = train.iter().map(|&i| data.ids[i].as_str()).collect();
            for &i in &eval {
                assert!(!train_ids.contains(data.ids[i].as_str()));
                assert_eq!(plan.fold_of(&data.article_ids[i]), Some(fold));
                assert!(seen_eval.insert(i));
            }
            assert_eq!(train.len() + eval.len(), data.len());
        }
        assert_eq!(seen_eval.len(), data.len());
    }
}

#[test]
fn agnostic_results_do_not_depend_on_other_tasks() {
    let (corpus, _, tasks) = common::synth_tasks(&small_synth(), &Task::ALL);
    let plan = plan_folds(&corpus, Task::T1, 3, 3).unwrap();
    let cfg = TrainConfig {
        strategy: Strategy::Agnostic,
        ..small_config(3)
    };
    let all = run_strategy(&tasks, &plan, &cfg).unwrap();
    let alone = run_cv(&tasks[1], &plan, &cfg).unwrap();
    assert_eq!(all[1].report, alone.report);
    assert_eq!(all[1].checkpoints, alone.checkpoints);
}

#[test]
fn dependent_strategy_checks_its_inputs() {
    let (corpus, _, tasks) = common::synth_tasks(&small_synth(), &Task::ALL);
    let plan = plan_folds(&corpus, Task::T1, 3, 3).unwrap();
    let reversed = vec![tasks[1].clone(), tasks[0].clone()];
    assert!(run_task_dependent(&reversed, &plan, &small_config(3)).is_err());
    assert!(run_task_dependent(&[], &plan, &small_config(3)).is_err());
    assert!(run_task_dependent(&tasks, &plan, &small_config(4)).is_err());
    let out = run_task_dependent(&tasks, &plan, &small_config(3)).unwrap();
    assert_eq!(out.len(), 3);
    for (o, data) in out.iter().zip(&tasks) {
        assert_eq!(o.report.task, data.task);
        assert_eq!(o.report.folds.len(), 3);
        let sum: f64 = o.report.fold_scores().iter().sum();
        assert_eq!(o.report.mean, sum / 3.0);
        assert_eq!(o.oof.len(), data.len());
    }
}

#[test]
fn inner_validation_and_language_breakdown() {
    let (corpus, _, tasks) = common::synth_tasks(&small_synth(), &[Task::T1]);
    let plan = plan_folds(&corpus, Task::T1, 3, 3).unwrap();
    let cfg = TrainConfig {
        val_frac: Some(0.2),
        ..small_config(3)
    };
    let mut out = run_cv(&tasks[0], &plan, &cfg).unwrap();
    assert_eq!(out.report.selection, Selection::InnerValidation);
    for f in &out.report.folds {
        let full_train = 150 - f.eval_size;
        assert_eq!(f.train_size, full_train - (full_train as f64 * 0.2).ceil() as usize);
    }
    out.add_language_breakdown(&tasks[0]).unwrap();
    let langs: Vec<&String> = out.report.by_language.as_ref().unwrap().keys().collect();
    let expected: BTreeMap<&str, ()> = tasks[0].languages.iter().map(|l| (l.as_str(), ())).collect();
    assert_eq!(langs.len(), expected.len());
}

#[test]
fn undersampling_runs_on_multiclass() {
    let (corpus, _, tasks) = common::synth_tasks(&small_synth(), &[Task::T1]);
    let plan = plan_folds(&corpus, Task::T1, 3, 3).unwrap();
    let cfg = TrainConfig {
        undersample: true,
        sample_weights: false,
        ..small_config(3)
    };
    let out = run_cv(&tasks[0], &plan, &cfg).unwrap();
    assert_eq!(out.report.folds.len(), 3);
}

#[test]
fn ablation_rows_and_determinism() {
    let (corpus, _, tasks) = common::synth_tasks(&small_synth(), &Task::ALL);
    let plan = plan_folds(&corpus, Task::T1, 3, 3).unwrap();
    let a = run_ablation(&tasks, &plan, &small_config(3)).unwrap();
    let count = |t: Task| a.rows.iter().filter(|r| r.task == t).count();
    assert_eq!(count(Task::T1), 4);
    assert_eq!(count(Task::T2), 3);
    assert_eq!(count(Task::T3), 3);
    assert!(a.mean(Variant::WithoutCw, Task::T2).is_none());
    let b = run_ablation(&tasks, &plan, &small_config(3)).unwrap();
    assert_eq!(serde_json::to_vec(&a).unwrap(), serde_json::to_vec(&b).unwrap());
}

#[test]
fn ensemble_over_fold_checkpoints() {
    let (corpus, _, tasks) = common::synth_tasks(&small_synth(), &[Task::T1]);
    let plan = plan_folds(&corpus, Task::T1, 5, 3).unwrap();
    let out = run_cv(&tasks[0], &plan, &small_config(5)).unwrap();
    let top = select_top_k(&out.checkpoints, 3).unwrap();
    let scores: Vec<f64> = top.iter().map(|c| c.provenance.validation_score).collect();
    assert!(scores.windows(2).all(|w| w[0] >= w[1]));
    let x = &tasks[0].features[0];
    let d = ensemble_predict(&top, x, 0.5).unwrap();
    assert_eq!(d.as_set().len(), 1);
    assert!(ensemble_predict(&top[..2], x, 0.5).is_err());
}
