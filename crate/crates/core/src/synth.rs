//! Synthetic imbalanced fixtures: a corpus with labels for all three tasks and
//! a matching embedding table.
//!
//! Article vectors are drawn from class-conditional Gaussians with unit
//! covariance whose means sit at pairwise distance `separation`. Frame labels
//! depend on which class mean an article vector lies nearest to, technique
//! labels are thresholded projections of the same coordinates, and each
//! paragraph vector is its article vector plus noise, so all tasks share signal.

use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::corpus::{paragraph_unit_id, Corpus, DocumentRecord, ParagraphRecord};
use crate::error::{Error, Result};
use crate::features::EmbeddingTable;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub n: usize,
    /// Relative class sizes, paired with `labels` in order.
    pub ratio: Vec<u64>,
    pub labels: Vec<String>,
    /// Distance between any two class means.
    pub separation: f64,
    pub dim: usize,
    pub frames: usize,
    pub techniques: usize,
    pub max_paragraphs: usize,
    pub paragraph_noise: f64,
    /// Projection threshold above which a paragraph carries a technique.
    pub technique_threshold: f64,
    pub languages: Vec<String>,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n: 1234,
            ratio: vec![878, 269, 87],
            labels: vec!["opinion".into(), "reporting".into(), "satire".into()],
            separation: 3.0,
            dim: 16,
            frames: 4,
            techniques: 5,
            max_paragraphs: 3,
            paragraph_noise: 0.5,
            technique_threshold: 1.0,
            languages: vec!["en".into(), "fr".into(), "it".into()],
            seed: 13,
        }
    }
}

/// Splits `n` in proportion to `ratio` by largest remainder; ties go to the
/// earlier class. Every class must receive at least one unit.
pub fn exact_counts(n: usize, ratio: &[u64]) -> Result<Vec<usize>> {
    let total: u64 = ratio.iter().sum();
    if ratio.is_empty() || total == 0 {
        return Err(Error::InvalidArgument("ratio must have a positive entry".into()));
    }
    let n128 = n as u128;
    let mut counts: Vec<usize> = ratio.iter().map(|&r| (n128 * r as u128 / total as u128) as usize).collect();
    let mut order: Vec<usize> = (0..ratio.len()).collect();
    order.sort_by_key(|&j| std::cmp::Reverse(n128 * ratio[j] as u128 % total as u128));
    let short = n - counts.iter().sum::<usize>();
    for &j in order.iter().take(short) {
        counts[j] += 1;
    }
    if let Some(j) = counts.iter().position(|&c| c == 0) {
        return Err(Error::InvalidArgument(format!(
            "n = {n} leaves class {j} empty under ratio {ratio:?}"
        )));
    }
    Ok(counts)
}

/// A generated corpus with one embedding per unit (articles and `id#para` paragraphs).
#[derive(Debug, Clone, PartialEq)]
pub struct SynthFixture {
    pub records: Vec<DocumentRecord>,
    pub embeddings: Vec<(String, Vec<f64>)>,
}

#[derive(Serialize)]
struct EmbeddingLine<'a> {
    id: &'a str,
    vector: &'a [f64],
}

impl SynthFixture {
    pub fn corpus(&self) -> Result<Corpus> {
        Ok(Corpus::from_records(self.records.clone())?.preprocessed())
    }

    pub fn embedding_table(&self) -> EmbeddingTable {
        EmbeddingTable {
            dim: self.embeddings.first().map_or(0, |(_, v)| v.len()),
            vectors: self.embeddings.iter().cloned().collect(),
        }
    }

    /// Writes `corpus.jsonl` and `embeddings.jsonl` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<(PathBuf, PathBuf)> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let corpus_path = dir.join("corpus.jsonl");
        let mut out = String::new();
        for r in &self.records {
            out.push_str(&serde_json::to_string(r)?);
            out.push('\n');
        }
        fs::write(&corpus_path, out).map_err(|e| Error::io(&corpus_path, e))?;
        let emb_path = dir.join("embeddings.jsonl");
        let mut out = String::new();
        for (id, vector) in &self.embeddings {
            out.push_str(&serde_json::to_string(&EmbeddingLine { id, vector })?);
            out.push('\n');
        }
        fs::write(&emb_path, out).map_err(|e| Error::io(&emb_path, e))?;
        Ok((corpus_path, emb_path))
    }
}

fn alpha(mut i: usize) -> String {
    let mut s = Vec::new();
    loop {
        s.push(b'a' + (i % 26) as u8);
        i /= 26;
        if i == 0 {
            break;
        }
        i -= 1;
    }
    s.reverse();
    String::from_utf8(s).expect("ascii")
}

const FILLER: [&str; 8] = ["the", "news", "said", "about", "report", "today", "people", "world"];

/// Letters-only tokens whose counts follow the vector's coordinates, so TF-IDF
/// features carry the same signal as the embeddings.
fn render_text(x: &[f64], rng: &mut ChaCha8Rng) -> String {
    let mut words = Vec::new();
    for (i, &v) in x.iter().enumerate() {
        let reps = (v.abs() * 1.5).round() as usize;
        let word = format!("f{}{}", alpha(i), if v > 0.0 { "p" } else { "n" });
        words.extend(std::iter::repeat_n(word, reps));
    }
    for _ in 0..rng.random_range(3..12) {
        words.push(FILLER[rng.random_range(0..FILLER.len())].to_string());
    }
    words.shuffle(rng);
    words.join(" ")
}

fn unit_vector(len: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let v: Vec<f64> = (0..len).map(|_| rng.sample(StandardNormal)).collect();
    let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt().max(1e-12);
    v.into_iter().map(|a| a / norm).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn generate(config: &SynthConfig) -> Result<SynthFixture> {
    let c = config.labels.len();
    if c < 2 || config.ratio.len() != c {
        return Err(Error::InvalidArgument(format!(
            "need at least 2 labels and one ratio entry per label (got {} labels, {} ratio entries)",
            c,
            config.ratio.len()
        )));
    }
    if config.dim < c {
        return Err(Error::InvalidArgument(format!("dim {} is smaller than the {c} classes", config.dim)));
    }
    if !(config.separation.is_finite() && config.separation > 0.0) {
        return Err(Error::InvalidArgument("separation must be positive".into()));
    }
    if config.frames == 0 || config.techniques == 0 || config.max_paragraphs == 0 || config.languages.is_empty() {
        return Err(Error::InvalidArgument(
            "frames, techniques, max_paragraphs and languages must be non-empty".into(),
        ));
    }
    if !(config.paragraph_noise.is_finite() && config.paragraph_noise >= 0.0) {
        return Err(Error::InvalidArgument("paragraph_noise must be non-negative".into()));
    }
    let counts = exact_counts(config.n, &config.ratio)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    // Simplex vertices scaled to the requested pairwise distance.
    let scale = config.separation / std::f64::consts::SQRT_2;
    let centroid = scale / c as f64;
    let technique_dirs: Vec<Vec<f64>> = (0..config.techniques).map(|_| unit_vector(c, &mut rng)).collect();

    let mut classes: Vec<usize> = counts.iter().enumerate().flat_map(|(j, &n)| std::iter::repeat_n(j, n)).collect();
    classes.shuffle(&mut rng);

    let width = config.n.to_string().len();
    let mut records = Vec::with_capacity(config.n);
    let mut embeddings = Vec::new();
    for (i, &y) in classes.iter().enumerate() {
        let id = format!("art{i:0width$}");
        let x: Vec<f64> = (0..config.dim)
            .map(|d| {
                let mean = if d == y { scale } else { 0.0 };
                mean + rng.sample::<f64, _>(StandardNormal)
            })
            .collect();

        // Frames follow the class region the vector falls in (its nearest class mean).
        let region = crate::model::argmax(&x[..c]);
        let mut frames: Vec<String> = [region % config.frames, (region + 1) % config.frames]
            .iter()
            .map(|&f| format!("frame_{}", alpha(f)))
            .collect();
        frames.sort();
        frames.dedup();

        let n_paras = rng.random_range(1..=config.max_paragraphs);
        let mut paragraphs = Vec::with_capacity(n_paras);
        for p in 0..n_paras {
            let v: Vec<f64> = x
                .iter()
                .map(|a| a + config.paragraph_noise * rng.sample::<f64, _>(StandardNormal))
                .collect();
            let pz: Vec<f64> = v[..c].iter().map(|a| a - centroid).collect();
            let techniques: Vec<String> = technique_dirs
                .iter()
                .enumerate()
                .filter(|(_, w)| dot(w, &pz) > config.technique_threshold)
                .map(|(t, _)| format!("technique_{}", alpha(t)))
                .collect();
            let para_id = p as u32 + 1;
            paragraphs.push(ParagraphRecord {
                para_id,
                text: render_text(&v, &mut rng),
                labels_t3: Some(techniques),
            });
            embeddings.push((paragraph_unit_id(&id, para_id), v));
        }
        let language = config.languages[rng.random_range(0..config.languages.len())].clone();
        records.push(DocumentRecord {
            text: render_text(&x, &mut rng),
            id: id.clone(),
            language,
            labels_t1: Some(config.labels[y].clone()),
            labels_t2: Some(frames),
            paragraphs: Some(paragraphs),
        });
        embeddings.push((id, x));
    }
    Ok(SynthFixture { records, embeddings })
}
