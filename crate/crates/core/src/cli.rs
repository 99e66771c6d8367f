//! Command-line entry point.
//!
//! Settings resolve as: flags, then `IMB_SEED`, then the `--config` file, then
//! built-in defaults. Every `train` and `ablate` run writes its fully resolved
//! configuration to `<out>/config.json`; passing that file back as `--config`
//! reproduces the run.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::corpus::{load_merged, plan_folds, token_stats, Corpus, FoldPlan, Task};
use crate::error::Error;
use crate::features::{fit_tfidf, load_embeddings, FeatureSpec, Featurizer, TfidfConfig, TfidfModel};
use crate::pipeline::{
    ensemble_predict, load_manifest, render_ablation, render_cv, run_ablation, run_strategy, select_top_k, write_run,
    CvReport, Seeds, Strategy, TaskData, TrainConfig,
};
use crate::synth::{generate, SynthConfig};

/// Environment variable overriding every seed.
pub const SEED_ENV: &str = "IMB_SEED";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub corpus: Option<PathBuf>,
    /// Further corpora merged into `corpus` (duplicate ids are rejected).
    pub extra: Vec<PathBuf>,
    pub tasks: Vec<Task>,
    pub features: FeatureSpec,
    pub tfidf: TfidfConfig,
    pub by_language: bool,
    pub output: Option<PathBuf>,
    pub train: TrainConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            corpus: None,
            extra: Vec::new(),
            tasks: Task::ALL.to_vec(),
            features: FeatureSpec::Tfidf,
            tfidf: TfidfConfig::default(),
            by_language: false,
            output: None,
            train: TrainConfig::default(),
        }
    }
}

impl RunConfig {
    /// Checks the configuration, naming the offending field on failure.
    pub fn validate(&self) -> Result<(), String> {
        if self.corpus.is_none() {
            return Err("corpus: required".into());
        }
        if self.output.is_none() {
            return Err("output: required".into());
        }
        if self.tasks.is_empty() {
            return Err("tasks: at least one task is required".into());
        }
        if self.tasks.windows(2).any(|w| w[0] >= w[1]) {
            return Err("tasks: must be distinct and ordered T1, T2, T3".into());
        }
        if self.tfidf.max_tokens == 0 {
            return Err("tfidf.max_tokens: must be at least 1".into());
        }
        self.train.validate().map_err(|(field, msg)| format!("train.{field}: {msg}"))
    }
}

enum Failure {
    Config(String),
    Module(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Module(e)
    }
}

type CliResult<T> = std::result::Result<T, Failure>;

#[derive(Parser)]
#[command(name = "imbaltext", version, about = "Imbalanced multilingual text classification")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Token statistics of a task's labeled units.
    Stats(StatsArgs),
    /// Write a stratified fold plan.
    Folds(FoldsArgs),
    /// Cross-validated training with checkpoints and reports.
    Train(RunArgs),
    /// Run the ablation grid on one fold plan.
    Ablate(RunArgs),
    /// Ensemble predictions for a corpus from a finished training run.
    Predict(PredictArgs),
    /// Generate a synthetic imbalanced fixture.
    Synth(SynthArgs),
}

#[derive(Args)]
struct StatsArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    extra: Vec<PathBuf>,
    #[arg(long, default_value = "T1")]
    task: Task,
    /// Print JSON instead of text.
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct FoldsArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    extra: Vec<PathBuf>,
    #[arg(long, default_value = "T1")]
    task: Task,
    #[arg(long, default_value_t = 10)]
    k: usize,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum Toggle {
    On,
    Off,
}

impl Toggle {
    fn on(self) -> bool {
        matches!(self, Toggle::On)
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum StrategyArg {
    Agnostic,
    Dependent,
}

#[derive(Args)]
struct RunArgs {
    /// JSON run configuration; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    corpus: Option<PathBuf>,
    #[arg(long)]
    extra: Vec<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    tasks: Option<Vec<Task>>,
    /// `tfidf` or `embeddings:PATH`.
    #[arg(long)]
    features: Option<FeatureSpec>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    strategy: Option<StrategyArg>,
    #[arg(long, value_enum)]
    class_weights: Option<Toggle>,
    #[arg(long, value_enum)]
    sample_weights: Option<Toggle>,
    #[arg(long, value_enum)]
    undersample: Option<Toggle>,
    /// Sets the fold, initialisation and sampler seeds.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    epochs_max: Option<usize>,
    #[arg(long)]
    patience: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    hidden: Option<usize>,
    #[arg(long)]
    threshold: Option<f64>,
    #[arg(long)]
    sampler_epoch_multiplier: Option<f64>,
    /// Hold out this fraction of each training split for early stopping.
    #[arg(long)]
    val_frac: Option<f64>,
    /// Add per-language scores to the reports.
    #[arg(long)]
    by_language: bool,
}

#[derive(Args)]
struct PredictArgs {
    /// Directory written by `train`.
    #[arg(long)]
    run: PathBuf,
    #[arg(long)]
    corpus: PathBuf,
    /// Feature source for the new corpus; defaults to the run's.
    #[arg(long)]
    features: Option<FeatureSpec>,
    #[arg(long, value_delimiter = ',')]
    tasks: Option<Vec<Task>>,
    /// Output JSON Lines file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SynthArgs {
    /// Class ratio such as `878:269:87`.
    #[arg(long, default_value = "878:269:87")]
    ratio: String,
    #[arg(long, default_value_t = 1234)]
    n: usize,
    /// Comma-separated class names, paired with the ratio.
    #[arg(long, value_delimiter = ',')]
    labels: Option<Vec<String>>,
    #[arg(long)]
    separation: Option<f64>,
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
}

fn env_seed() -> CliResult<Option<u64>> {
    match std::env::var(SEED_ENV) {
        Ok(s) => s
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| Failure::Config(format!("{SEED_ENV}: not an unsigned integer: {s:?}"))),
        Err(_) => Ok(None),
    }
}

fn read_config(path: &Path) -> CliResult<RunConfig> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))
}

fn resolve(args: &RunArgs) -> CliResult<RunConfig> {
    let mut c = match &args.config {
        Some(path) => read_config(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = env_seed()? {
        c.train.seeds = Seeds::all(seed);
    }
    if let Some(p) = &args.corpus {
        c.corpus = Some(p.clone());
    }
    if !args.extra.is_empty() {
        c.extra = args.extra.clone();
    }
    if let Some(t) = &args.tasks {
        c.tasks = t.clone();
    }
    if let Some(f) = &args.features {
        c.features = f.clone();
    }
    if let Some(o) = &args.out {
        c.output = Some(o.clone());
    }
    if args.by_language {
        c.by_language = true;
    }
    let t = &mut c.train;
    if let Some(s) = args.strategy {
        t.strategy = match s {
            StrategyArg::Agnostic => Strategy::Agnostic,
            StrategyArg::Dependent => Strategy::Dependent,
        };
    }
    if let Some(v) = args.class_weights {
        t.class_weights = v.on();
    }
    if let Some(v) = args.sample_weights {
        t.sample_weights = v.on();
    }
    if let Some(v) = args.undersample {
        t.undersample = v.on();
    }
    if let Some(seed) = args.seed {
        t.seeds = Seeds::all(seed);
    }
    if let Some(v) = args.k {
        t.k = v;
    }
    if let Some(v) = args.epochs_max {
        t.epochs_max = v;
    }
    if let Some(v) = args.patience {
        t.patience = v;
    }
    if let Some(v) = args.batch_size {
        t.batch_size = v;
    }
    if let Some(v) = args.lr {
        t.optimizer.lr = v;
    }
    if let Some(v) = args.hidden {
        t.hidden = Some(v);
    }
    if let Some(v) = args.threshold {
        t.threshold = v;
    }
    if let Some(v) = args.sampler_epoch_multiplier {
        t.sampler_epoch_multiplier = v;
    }
    if let Some(v) = args.val_frac {
        t.val_frac = Some(v);
    }
    c.validate().map_err(Failure::Config)?;
    Ok(c)
}

fn corpus_paths(corpus: &Path, extra: &[PathBuf]) -> Vec<PathBuf> {
    std::iter::once(corpus.to_path_buf()).chain(extra.iter().cloned()).collect()
}

/// Fits TF-IDF on every unit of the selected tasks (articles once, paragraphs
/// for T3) or loads the embedding table.
fn build_featurizer(corpus: &Corpus, tasks: &[Task], spec: &FeatureSpec, tfidf: TfidfConfig) -> CliResult<Featurizer> {
    match spec {
        FeatureSpec::Tfidf => {
            let mut docs: Vec<Vec<String>> = Vec::new();
            if tasks.iter().any(|t| !t.is_paragraph_level()) {
                docs.extend(corpus.documents.iter().map(|d| d.tokens.clone()));
            }
            if tasks.contains(&Task::T3) {
                docs.extend(corpus.documents.iter().flat_map(|d| d.paragraphs.iter().map(|p| p.tokens.clone())));
            }
            Ok(Featurizer::Tfidf(fit_tfidf(&docs, tfidf)?))
        }
        FeatureSpec::Embeddings(path) => {
            let ids: Vec<String> = tasks
                .iter()
                .flat_map(|&t| corpus.units(t).into_iter().map(|u| u.id))
                .collect();
            Ok(Featurizer::Embeddings(load_embeddings(path, ids.iter().map(String::as_str))?))
        }
    }
}

struct Prepared {
    tasks: Vec<TaskData>,
    plan: FoldPlan,
    featurizer: Featurizer,
}

fn prepare(config: &RunConfig) -> CliResult<Prepared> {
    let corpus_path = config.corpus.as_deref().expect("validated");
    let corpus = load_merged(&corpus_paths(corpus_path, &config.extra), Some(&config.tasks))?.preprocessed();
    let featurizer = build_featurizer(&corpus, &config.tasks, &config.features, config.tfidf)?;
    let tasks = config
        .tasks
        .iter()
        .map(|&t| TaskData::build(&corpus, t, &featurizer))
        .collect::<crate::Result<Vec<_>>>()?;
    let plan = plan_folds(&corpus, config.tasks[0], config.train.k, config.train.seeds.folds)?;
    Ok(Prepared {
        tasks,
        plan,
        featurizer,
    })
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    crate::pipeline::report::write_json(path, value)?;
    Ok(())
}

fn write_common(out: &Path, config: &RunConfig, prepared: &Prepared) -> CliResult<()> {
    write_json(&out.join("config.json"), config)?;
    write_json(&out.join("folds.json"), &prepared.plan)?;
    if let Featurizer::Tfidf(model) = &prepared.featurizer {
        write_json(&out.join("featurizer.json"), model)?;
    }
    Ok(())
}

fn cmd_train(args: &RunArgs) -> CliResult<()> {
    let config = resolve(args)?;
    let out = config.output.clone().expect("validated");
    let prepared = prepare(&config)?;
    let mut outcomes = run_strategy(&prepared.tasks, &prepared.plan, &config.train)?;
    if config.by_language {
        for (outcome, data) in outcomes.iter_mut().zip(&prepared.tasks) {
            outcome.add_language_breakdown(data)?;
        }
    }
    write_common(&out, &config, &prepared)?;
    write_run(&out, &outcomes)?;
    let reports: Vec<&CvReport> = outcomes.iter().map(|o| &o.report).collect();
    print!("{}", render_cv(&reports));
    Ok(())
}

fn cmd_ablate(args: &RunArgs) -> CliResult<()> {
    let config = resolve(args)?;
    let out = config.output.clone().expect("validated");
    let prepared = prepare(&config)?;
    let report = run_ablation(&prepared.tasks, &prepared.plan, &config.train)?;
    write_common(&out, &config, &prepared)?;
    write_json(&out.join("ablation.json"), &report)?;
    let text = render_ablation(&report);
    let path = out.join("ablation.txt");
    fs::write(&path, &text).map_err(|e| Error::io(&path, e))?;
    print!("{text}");
    Ok(())
}

fn cmd_stats(args: &StatsArgs) -> CliResult<()> {
    let corpus = load_merged(&corpus_paths(&args.corpus, &args.extra), Some(&[args.task]))?.preprocessed();
    let stats = token_stats(&corpus, args.task)?;
    if args.json {
        println!("{}", serde_json::to_string_pretty(&stats).map_err(Error::from)?);
    } else {
        println!(
            "{}: {} units, min {} tokens, max {} tokens, avg {:.2} tokens",
            stats.task, stats.units, stats.min_tokens, stats.max_tokens, stats.avg_tokens
        );
    }
    Ok(())
}

fn cmd_folds(args: &FoldsArgs) -> CliResult<()> {
    let seed = args.seed.or(env_seed()?).unwrap_or(Seeds::default().folds);
    let corpus = load_merged(&corpus_paths(&args.corpus, &args.extra), Some(&[args.task]))?;
    let plan = plan_folds(&corpus, args.task, args.k, seed)?;
    write_json(&args.out, &plan)?;
    println!("{} folds of sizes {:?} written to {}", plan.k, plan.fold_sizes(), args.out.display());
    Ok(())
}

#[derive(Serialize)]
struct PredictionLine<'a> {
    id: &'a str,
    task: Task,
    labels: Vec<&'a str>,
}

fn cmd_predict(args: &PredictArgs) -> CliResult<()> {
    let config = read_config(&args.run.join("config.json"))?;
    let manifest = load_manifest(&args.run)?;
    let tasks = args.tasks.clone().unwrap_or_else(|| manifest.tasks());
    // Loading with an empty task filter drops any gold labels in the file.
    let corpus = load_merged(std::slice::from_ref(&args.corpus), Some(&[]))?.preprocessed();
    let featurizer = match args.features.as_ref().unwrap_or(&config.features) {
        FeatureSpec::Tfidf => {
            let path = args.run.join("featurizer.json");
            let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
            let model: TfidfModel = serde_json::from_slice(&bytes).map_err(Error::from)?;
            Featurizer::Tfidf(model)
        }
        spec => build_featurizer(&corpus, &tasks, spec, config.tfidf)?,
    };
    let mut out = String::new();
    for task in tasks {
        let pool = manifest.checkpoints(&args.run, task)?;
        if pool.is_empty() {
            return Err(Failure::Module(Error::InvalidArgument(format!("run has no {task} checkpoints"))));
        }
        let models = select_top_k(&pool, 3)?;
        let labels = &models[0].labels;
        for unit in corpus.units(task) {
            let x = featurizer.featurize(&unit)?;
            let decision = ensemble_predict(&models, &x, config.train.threshold)?;
            let line = PredictionLine {
                id: &unit.id,
                task,
                labels: decision.as_set().into_iter().map(|j| labels[j].as_str()).collect(),
            };
            out.push_str(&serde_json::to_string(&line).map_err(Error::from)?);
            out.push('\n');
        }
    }
    match &args.out {
        Some(path) => fs::write(path, out).map_err(|e| Error::io(path, e))?,
        None => std::io::stdout()
            .write_all(out.as_bytes())
            .map_err(|e| Error::io("<stdout>", e))?,
    }
    Ok(())
}

fn parse_ratio(s: &str) -> CliResult<Vec<u64>> {
    s.split(':')
        .map(|p| p.trim().parse::<u64>())
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|_| Failure::Config(format!("ratio: expected integers separated by ':', got {s:?}")))
}

fn cmd_synth(args: &SynthArgs) -> CliResult<()> {
    let ratio = parse_ratio(&args.ratio)?;
    let defaults = SynthConfig::default();
    let labels = match &args.labels {
        Some(l) => l.clone(),
        None if ratio.len() == defaults.labels.len() => defaults.labels.clone(),
        None => (0..ratio.len()).map(|j| format!("class_{}", (b'a' + (j % 26) as u8) as char)).collect(),
    };
    let config = SynthConfig {
        n: args.n,
        ratio,
        labels,
        separation: args.separation.unwrap_or(defaults.separation),
        dim: args.dim.unwrap_or(defaults.dim),
        seed: args.seed.or(env_seed()?).unwrap_or(defaults.seed),
        ..defaults
    };
    let fixture = generate(&config)?;
    let (corpus, embeddings) = fixture.write(&args.out)?;
    write_json(&args.out.join("synth.json"), &config)?;
    let space = fixture.corpus()?.label_space(Task::T1)?;
    let counts: Vec<String> = space.labels.iter().zip(&space.counts).map(|(l, n)| format!("{l} {n}")).collect();
    println!("{} articles ({}) written to {}", config.n, counts.join(", "), corpus.display());
    println!("embeddings written to {}", embeddings.display());
    Ok(())
}

/// Parses `args` (program name first) and runs the subcommand. Returns the exit
/// status: 0 on success, 1 on configuration or module errors, 2 on usage errors.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).try_init();
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let result = match &cli.command {
        Command::Stats(a) => cmd_stats(a),
        Command::Folds(a) => cmd_folds(a),
        Command::Train(a) => cmd_train(a),
        Command::Ablate(a) => cmd_ablate(a),
        Command::Predict(a) => cmd_predict(a),
        Command::Synth(a) => cmd_synth(a),
    };
    match result {
        Ok(()) => 0,
        Err(Failure::Config(msg)) => {
            eprintln!("error: config: {msg}");
            1
        }
        Err(Failure::Module(e)) => {
            eprintln!("error: {e}");
            1
        }
    }
}

pub fn main() -> i32 {
    run(std::env::args_os())
}
