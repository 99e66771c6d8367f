//! Fixed-length document representations: TF-IDF over unigrams, or precomputed
//! encoder embeddings loaded from a JSON Lines table.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::corpus::Unit;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureSource {
    Tfidf,
    Embedding,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Values {
    Dense(Vec<f64>),
    /// (column, value) pairs sorted by column, zeros omitted.
    Sparse(Vec<(usize, f64)>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub dim: usize,
    pub values: Values,
    pub source: FeatureSource,
}

pub enum NonZeros<'a> {
    Dense(std::iter::Enumerate<std::slice::Iter<'a, f64>>),
    Sparse(std::slice::Iter<'a, (usize, f64)>),
}

impl Iterator for NonZeros<'_> {
    type Item = (usize, f64);

    fn next(&mut self) -> Option<(usize, f64)> {
        match self {
            NonZeros::Dense(it) => it.next().map(|(i, &v)| (i, v)),
            NonZeros::Sparse(it) => it.next().copied(),
        }
    }
}

impl FeatureVector {
    pub fn dense(values: Vec<f64>, source: FeatureSource) -> Self {
        FeatureVector {
            dim: values.len(),
            values: Values::Dense(values),
            source,
        }
    }

    pub fn sparse(dim: usize, entries: Vec<(usize, f64)>, source: FeatureSource) -> Self {
        debug_assert!(entries.windows(2).all(|w| w[0].0 < w[1].0));
        debug_assert!(entries.iter().all(|&(i, _)| i < dim));
        FeatureVector {
            dim,
            values: Values::Sparse(entries),
            source,
        }
    }

    /// Iterates stored entries as (column, value). Dense vectors yield every column.
    pub fn iter(&self) -> NonZeros<'_> {
        match &self.values {
            Values::Dense(v) => NonZeros::Dense(v.iter().enumerate()),
            Values::Sparse(e) => NonZeros::Sparse(e.iter()),
        }
    }

    pub fn norm(&self) -> f64 {
        self.iter().map(|(_, v)| v * v).sum::<f64>().sqrt()
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        for (i, v) in self.iter() {
            out[i] = v;
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TfidfConfig {
    pub max_tokens: usize,
    pub min_df: usize,
}

impl Default for TfidfConfig {
    fn default() -> Self {
        TfidfConfig {
            max_tokens: 512,
            min_df: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TfidfModel {
    pub vocabulary: BTreeMap<String, usize>,
    pub doc_freq: Vec<usize>,
    pub n_docs: usize,
    pub max_tokens: usize,
}

/// Fits vocabulary and document frequencies. Each unit is truncated to
/// `max_tokens` before counting; the vocabulary keeps terms with document
/// frequency ≥ `min_df`, indexed in lexicographic order.
pub fn fit_tfidf<S: AsRef<str>>(units: &[Vec<S>], config: TfidfConfig) -> Result<TfidfModel> {
    if units.is_empty() {
        return Err(Error::InvalidArgument("cannot fit TF-IDF on zero units".into()));
    }
    let mut df: BTreeMap<&str, usize> = BTreeMap::new();
    for unit in units {
        let distinct: HashSet<&str> = unit.iter().take(config.max_tokens).map(AsRef::as_ref).collect();
        for term in distinct {
            *df.entry(term).or_default() += 1;
        }
    }
    let mut vocabulary = BTreeMap::new();
    let mut doc_freq = Vec::new();
    for (term, count) in df {
        if count >= config.min_df {
            vocabulary.insert(term.to_string(), doc_freq.len());
            doc_freq.push(count);
        }
    }
    Ok(TfidfModel {
        vocabulary,
        doc_freq,
        n_docs: units.len(),
        max_tokens: config.max_tokens,
    })
}

impl TfidfModel {
    pub fn dim(&self) -> usize {
        self.doc_freq.len()
    }

    /// Smoothed inverse document frequency, ln((1+N)/(1+df)) + 1.
    pub fn idf(&self, column: usize) -> f64 {
        ((1.0 + self.n_docs as f64) / (1.0 + self.doc_freq[column] as f64)).ln() + 1.0
    }

    /// Raw term count times idf, L2-normalised. Unknown terms are ignored; a unit
    /// with no known terms maps to the zero vector.
    pub fn transform<S: AsRef<str>>(&self, unit: &[S]) -> FeatureVector {
        let mut tf: BTreeMap<usize, f64> = BTreeMap::new();
        for token in unit.iter().take(self.max_tokens) {
            if let Some(&j) = self.vocabulary.get(token.as_ref()) {
                *tf.entry(j).or_default() += 1.0;
            }
        }
        let mut entries: Vec<(usize, f64)> = tf.into_iter().map(|(j, c)| (j, c * self.idf(j))).collect();
        let norm = entries.iter().map(|(_, v)| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            for (_, v) in &mut entries {
                *v /= norm;
            }
        }
        FeatureVector::sparse(self.dim(), entries, FeatureSource::Tfidf)
    }
}

pub fn transform_tfidf<S: AsRef<str>>(model: &TfidfModel, unit: &[S]) -> FeatureVector {
    model.transform(unit)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    pub dim: usize,
    pub vectors: HashMap<String, Vec<f64>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct EmbeddingRecord {
    id: String,
    vector: Vec<f64>,
}

/// Loads `{"id": .., "vector": [..]}` lines. Every id in `expected_ids` must be
/// present, all vectors must share one dimension, and all values must be finite.
pub fn load_embeddings<'a, I>(path: &Path, expected_ids: I) -> Result<EmbeddingTable>
where
    I: IntoIterator<Item = &'a str>,
{
    let content = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let parse_err = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut dim = None;
    let mut vectors = HashMap::new();
    for (i, line) in content.lines().enumerate() {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let record: EmbeddingRecord = serde_json::from_str(line).map_err(|e| parse_err(line_no, e.to_string()))?;
        let expected = *dim.get_or_insert(record.vector.len());
        if record.vector.len() != expected {
            return Err(parse_err(
                line_no,
                format!("vector has dimension {}, expected {expected}", record.vector.len()),
            ));
        }
        if record.vector.is_empty() {
            return Err(parse_err(line_no, "empty vector".into()));
        }
        if let Some(j) = record.vector.iter().position(|v| !v.is_finite()) {
            return Err(parse_err(line_no, format!("non-finite value at position {j}")));
        }
        if vectors.insert(record.id.clone(), record.vector).is_some() {
            return Err(parse_err(line_no, format!("duplicate id {:?}", record.id)));
        }
    }
    let mut missing: Vec<&str> = expected_ids.into_iter().filter(|id| !vectors.contains_key(*id)).collect();
    if !missing.is_empty() {
        missing.sort_unstable();
        missing.dedup();
        return Err(Error::Validation(format!(
            "{}: {} ids have no embedding: {}",
            path.display(),
            missing.len(),
            missing.join(", ")
        )));
    }
    Ok(EmbeddingTable {
        dim: dim.unwrap_or(0),
        vectors,
    })
}

impl EmbeddingTable {
    pub fn get(&self, id: &str) -> Result<FeatureVector> {
        self.vectors
            .get(id)
            .map(|v| FeatureVector::dense(v.clone(), FeatureSource::Embedding))
            .ok_or_else(|| Error::Validation(format!("no embedding for unit {id:?}")))
    }
}

/// Where features come from: `tfidf` or `embeddings:PATH`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FeatureSpec {
    Tfidf,
    Embeddings(PathBuf),
}

impl fmt::Display for FeatureSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FeatureSpec::Tfidf => f.write_str("tfidf"),
            FeatureSpec::Embeddings(p) => write!(f, "embeddings:{}", p.display()),
        }
    }
}

impl FromStr for FeatureSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "tfidf" {
            Ok(FeatureSpec::Tfidf)
        } else if let Some(path) = s.strip_prefix("embeddings:").filter(|p| !p.is_empty()) {
            Ok(FeatureSpec::Embeddings(PathBuf::from(path)))
        } else {
            Err(Error::InvalidArgument(format!(
                "feature source must be `tfidf` or `embeddings:PATH`, got {s:?}"
            )))
        }
    }
}

impl Serialize for FeatureSpec {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for FeatureSpec {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// A fitted or loaded feature mapping from units to vectors.
#[derive(Debug, Clone)]
pub enum Featurizer {
    Tfidf(TfidfModel),
    Embeddings(EmbeddingTable),
}

impl Featurizer {
    pub fn dim(&self) -> usize {
        match self {
            Featurizer::Tfidf(m) => m.dim(),
            Featurizer::Embeddings(t) => t.dim,
        }
    }

    pub fn featurize(&self, unit: &Unit) -> Result<FeatureVector> {
        match self {
            Featurizer::Tfidf(m) => Ok(m.transform(&unit.tokens)),
            Featurizer::Embeddings(t) => t.get(&unit.id),
        }
    }
}
