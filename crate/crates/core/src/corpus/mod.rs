//! Corpus ingestion, preprocessing, label spaces, token statistics and fold plans.
//!
//! A corpus file is JSON Lines with one article per line:
//!
//! ```text
//! {"id": "710376094", "language": "en", "text": "...", "labels_t1": "opinion",
//!  "labels_t2": ["Quality_of_life"],
//!  "paragraphs": [{"para_id": 1, "text": "...", "labels_t3": ["Repetition"]}]}
//! ```
//!
//! A single JSON array of the same objects is also accepted. Absent label keys
//! mean the article is unlabeled for that task; an empty `labels_t3` list marks
//! a labeled paragraph without techniques and is stored as [`NONE_LABEL`].

mod folds;
mod labels;
mod preprocess;

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use folds::{plan_folds, plan_folds_with_space, FoldPlan};
pub use labels::{LabelSpace, Mode, Task, NONE_LABEL};
pub use preprocess::{preprocess_text, tokenize};

/// On-disk shape of one article.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DocumentRecord {
    pub id: String,
    pub language: String,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels_t1: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels_t2: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub paragraphs: Option<Vec<ParagraphRecord>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParagraphRecord {
    pub para_id: u32,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels_t3: Option<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Paragraph {
    pub para_id: u32,
    pub raw_text: String,
    pub text: String,
    pub tokens: Vec<String>,
    pub labels_t3: Option<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Document {
    pub id: String,
    pub language: String,
    pub raw_text: String,
    pub text: String,
    pub tokens: Vec<String>,
    pub labels_t1: Option<String>,
    pub labels_t2: Option<Vec<String>>,
    pub paragraphs: Vec<Paragraph>,
}

impl Document {
    pub fn has_labels(&self, task: Task) -> bool {
        match task {
            Task::T1 => self.labels_t1.is_some(),
            Task::T2 => self.labels_t2.is_some(),
            Task::T3 => self.paragraphs.iter().any(|p| p.labels_t3.is_some()),
        }
    }
}

/// One classification unit of a task: an article for T1/T2, a paragraph for T3.
#[derive(Debug, Clone, PartialEq)]
pub struct Unit {
    pub id: String,
    pub article_id: String,
    pub language: String,
    pub tokens: Vec<String>,
    pub labels: Option<Vec<String>>,
}

/// Identifier of a paragraph unit, also used as its key in embedding files.
pub fn paragraph_unit_id(article_id: &str, para_id: u32) -> String {
    format!("{article_id}#{para_id}")
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Corpus {
    pub documents: Vec<Document>,
    preprocessed: bool,
}

impl Corpus {
    pub fn new(documents: Vec<Document>) -> Result<Self> {
        let mut seen = HashMap::new();
        for (i, d) in documents.iter().enumerate() {
            if let Some(first) = seen.insert(d.id.as_str(), i) {
                return Err(Error::Validation(format!(
                    "duplicate id {:?} (documents {} and {})",
                    d.id,
                    first + 1,
                    i + 1
                )));
            }
        }
        Ok(Corpus {
            documents,
            preprocessed: false,
        })
    }

    /// Builds a corpus from in-memory records with the same checks as [`load_corpus`].
    pub fn from_records(records: Vec<DocumentRecord>) -> Result<Self> {
        let path = Path::new("<records>");
        let documents = records
            .into_iter()
            .enumerate()
            .map(|(i, r)| document_from_record(r, None, path, i + 1))
            .collect::<Result<Vec<_>>>()?;
        Corpus::new(documents)
    }

    pub fn len(&self) -> usize {
        self.documents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }

    pub fn is_preprocessed(&self) -> bool {
        self.preprocessed
    }

    /// Appends another corpus, e.g. a released development set merged into training.
    pub fn merge(&mut self, other: Corpus) -> Result<()> {
        let mut documents = std::mem::take(&mut self.documents);
        documents.extend(other.documents);
        let preprocessed = self.preprocessed && other.preprocessed;
        *self = Corpus::new(documents)?;
        self.preprocessed = preprocessed;
        Ok(())
    }

    /// Fills `text` and `tokens` of every article and paragraph from `raw_text`.
    pub fn preprocess(&mut self) {
        for doc in &mut self.documents {
            doc.text = preprocess_text(&doc.raw_text);
            doc.tokens = tokenize(&doc.text);
            for p in &mut doc.paragraphs {
                p.text = preprocess_text(&p.raw_text);
                p.tokens = tokenize(&p.text);
            }
        }
        self.preprocessed = true;
    }

    pub fn preprocessed(mut self) -> Self {
        self.preprocess();
        self
    }

    /// Every unit of the task, labeled or not.
    pub fn units(&self, task: Task) -> Vec<Unit> {
        let mut out = Vec::new();
        for doc in &self.documents {
            match task {
                Task::T1 | Task::T2 => out.push(Unit {
                    id: doc.id.clone(),
                    article_id: doc.id.clone(),
                    language: doc.language.clone(),
                    tokens: doc.tokens.clone(),
                    labels: match task {
                        Task::T1 => doc.labels_t1.clone().map(|l| vec![l]),
                        _ => doc.labels_t2.clone(),
                    },
                }),
                Task::T3 => out.extend(doc.paragraphs.iter().map(|p| Unit {
                    id: paragraph_unit_id(&doc.id, p.para_id),
                    article_id: doc.id.clone(),
                    language: doc.language.clone(),
                    tokens: p.tokens.clone(),
                    labels: p.labels_t3.clone(),
                })),
            }
        }
        out
    }

    pub fn labeled_units(&self, task: Task) -> Vec<Unit> {
        self.units(task)
            .into_iter()
            .filter(|u| u.labels.is_some())
            .collect()
    }

    /// Label space built from the task's labeled units.
    pub fn label_space(&self, task: Task) -> Result<LabelSpace> {
        let units = self.labeled_units(task);
        LabelSpace::from_label_sets(
            task,
            units.iter().map(|u| u.labels.as_deref().unwrap_or_default()),
        )
    }

    /// Corpus restricted to the given article ids, in corpus order.
    pub fn subset<F: Fn(&Document) -> bool>(&self, keep: F) -> Corpus {
        Corpus {
            documents: self.documents.iter().filter(|d| keep(d)).cloned().collect(),
            preprocessed: self.preprocessed,
        }
    }

    pub fn to_records(&self) -> Vec<DocumentRecord> {
        self.documents
            .iter()
            .map(|d| DocumentRecord {
                id: d.id.clone(),
                language: d.language.clone(),
                text: d.raw_text.clone(),
                labels_t1: d.labels_t1.clone(),
                labels_t2: d.labels_t2.clone(),
                paragraphs: if d.paragraphs.is_empty() {
                    None
                } else {
                    Some(
                        d.paragraphs
                            .iter()
                            .map(|p| ParagraphRecord {
                                para_id: p.para_id,
                                text: p.raw_text.clone(),
                                labels_t3: p.labels_t3.as_ref().map(|l| {
                                    if l.len() == 1 && l[0] == NONE_LABEL {
                                        Vec::new()
                                    } else {
                                        l.clone()
                                    }
                                }),
                            })
                            .collect(),
                    )
                },
            })
            .collect()
    }

    /// Writes the corpus as JSON Lines using raw (unprocessed) text.
    pub fn save_jsonl(&self, path: &Path) -> Result<()> {
        let mut out = String::new();
        for record in self.to_records() {
            out.push_str(&serde_json::to_string(&record)?);
            out.push('\n');
        }
        fs::write(path, out).map_err(|e| Error::io(path, e))
    }
}

fn record_error(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

fn validation_error(path: &Path, line: usize, message: impl std::fmt::Display) -> Error {
    Error::Validation(format!("{}: line {line}: {message}", path.display()))
}

fn document_from_record(
    record: DocumentRecord,
    task_filter: Option<&[Task]>,
    path: &Path,
    line: usize,
) -> Result<Document> {
    let keep = |t: Task| task_filter.is_none_or(|f| f.contains(&t));
    let mut paragraphs = Vec::new();
    let mut last_para: Option<u32> = None;
    for p in record.paragraphs.unwrap_or_default() {
        if let Some(prev) = last_para {
            if p.para_id <= prev {
                return Err(validation_error(
                    path,
                    line,
                    format!(
                        "para_id {} does not increase after {prev} in article {:?}",
                        p.para_id, record.id
                    ),
                ));
            }
        }
        last_para = Some(p.para_id);
        let labels_t3 = match p.labels_t3 {
            Some(labels) if keep(Task::T3) => {
                if labels.iter().any(|l| l == NONE_LABEL) && labels.len() > 1 {
                    return Err(validation_error(
                        path,
                        line,
                        format!("paragraph {} mixes {NONE_LABEL:?} with other labels", p.para_id),
                    ));
                }
                if labels.is_empty() {
                    Some(vec![NONE_LABEL.to_string()])
                } else {
                    Some(dedup_sorted(labels))
                }
            }
            _ => None,
        };
        paragraphs.push(Paragraph {
            para_id: p.para_id,
            raw_text: p.text,
            text: String::new(),
            tokens: Vec::new(),
            labels_t3,
        });
    }
    Ok(Document {
        id: record.id,
        language: record.language,
        raw_text: record.text,
        text: String::new(),
        tokens: Vec::new(),
        labels_t1: record.labels_t1.filter(|_| keep(Task::T1)),
        labels_t2: record.labels_t2.filter(|_| keep(Task::T2)).map(dedup_sorted),
        paragraphs,
    })
}

fn dedup_sorted(mut labels: Vec<String>) -> Vec<String> {
    labels.sort();
    labels.dedup();
    labels
}

/// Loads a JSON Lines (or JSON array) corpus. Text is kept raw; call
/// [`Corpus::preprocess`] before computing statistics or features.
///
/// Labels of tasks outside `task_filter` are dropped.
pub fn load_corpus(path: &Path, task_filter: Option<&[Task]>) -> Result<Corpus> {
    let content = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_corpus(&content, path, task_filter)
}

pub(crate) fn parse_corpus(content: &str, path: &Path, task_filter: Option<&[Task]>) -> Result<Corpus> {
    let entries: Vec<(usize, serde_json::Value)> = if content.trim_start().starts_with('[') {
        let values: Vec<serde_json::Value> = serde_json::from_str(content)
            .map_err(|e| record_error(path, e.line(), e.to_string()))?;
        values.into_iter().enumerate().map(|(i, v)| (i + 1, v)).collect()
    } else {
        let mut out = Vec::new();
        for (i, line) in content.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let value = serde_json::from_str(line).map_err(|e| record_error(path, i + 1, e.to_string()))?;
            out.push((i + 1, value));
        }
        out
    };

    let mut documents = Vec::with_capacity(entries.len());
    let mut first_line: HashMap<String, usize> = HashMap::new();
    for (line, value) in entries {
        let record: DocumentRecord =
            serde_json::from_value(value).map_err(|e| validation_error(path, line, e))?;
        if let Some(first) = first_line.get(&record.id) {
            return Err(validation_error(
                path,
                line,
                format!("duplicate id {:?} (first seen on line {first})", record.id),
            ));
        }
        first_line.insert(record.id.clone(), line);
        documents.push(document_from_record(record, task_filter, path, line)?);
    }
    Corpus::new(documents)
}

/// Loads and merges several corpus files in order. Duplicate ids across files are rejected.
pub fn load_merged(paths: &[PathBuf], task_filter: Option<&[Task]>) -> Result<Corpus> {
    let mut corpus = Corpus::default();
    for path in paths {
        corpus.merge(load_corpus(path, task_filter)?)?;
    }
    Ok(corpus)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsReport {
    pub task: Task,
    pub units: usize,
    pub min_tokens: usize,
    pub max_tokens: usize,
    pub avg_tokens: f64,
}

/// Minimum, maximum and mean whitespace-token counts over the task's labeled units.
pub fn token_stats(corpus: &Corpus, task: Task) -> Result<StatsReport> {
    if !corpus.is_preprocessed() {
        return Err(Error::InvalidArgument("token_stats needs a preprocessed corpus".into()));
    }
    let lengths: Vec<usize> = corpus
        .labeled_units(task)
        .iter()
        .map(|u| u.tokens.len())
        .collect();
    if lengths.is_empty() {
        return Err(Error::InvalidArgument(format!("no labeled {task} units")));
    }
    let total: usize = lengths.iter().sum();
    Ok(StatsReport {
        task,
        units: lengths.len(),
        min_tokens: *lengths.iter().min().unwrap(),
        max_tokens: *lengths.iter().max().unwrap(),
        avg_tokens: total as f64 / lengths.len() as f64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(s: &str) -> Result<Corpus> {
        parse_corpus(s, Path::new("mem.jsonl"), None)
    }

    #[test]
    fn parses_two_lines() {
        let c = parse(concat!(
            r#"{"id":"1","language":"en","text":"Hi there","labels_t1":"opinion"}"#,
            "\n",
            r#"{"id":"2","language":"fr","text":"Salut","labels_t2":["b","a"]}"#,
            "\n"
        ))
        .unwrap();
        assert_eq!(c.len(), 2);
        assert_eq!(c.documents[0].raw_text, "Hi there");
        assert!(c.documents[0].text.is_empty());
        assert_eq!(c.documents[1].labels_t2.as_deref(), Some(&["a".to_string(), "b".to_string()][..]));
    }

    #[test]
    fn empty_file_is_empty_corpus() {
        assert!(parse("").unwrap().is_empty());
    }

    #[test]
    fn json_array_accepted() {
        let c = parse(r#"[{"id":"1","language":"en","text":"a"},{"id":"2","language":"en","text":"b"}]"#).unwrap();
        assert_eq!(c.len(), 2);
    }

    #[test]
    fn duplicate_id_names_line() {
        let line = |id: &str| format!(r#"{{"id":"{id}","language":"en","text":"x"}}"#);
        let s = [line("23114"), line("2672"), line("710376094"), line("710376094")].join("\n");
        let err = parse(&s).unwrap_err().to_string();
        assert!(err.contains("line 4"), "{err}");
        let s = [line("710376094"), line("2672"), line("710376094")].join("\n");
        let err = parse(&s).unwrap_err();
        assert!(matches!(err, Error::Validation(_)));
        assert!(err.to_string().contains("line 3"), "{err}");
    }

    #[test]
    fn malformed_line_is_parse_error() {
        let s = "{\"id\":\"1\",\"language\":\"en\",\"text\":\"x\"}\n{not json\n";
        match parse(s).unwrap_err() {
            Error::Parse { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn unknown_task_key_rejected() {
        let err = parse(r#"{"id":"1","language":"en","text":"x","labels_t4":"y"}"#).unwrap_err();
        assert!(matches!(err, Error::Validation(_)), "{err}");
    }

    #[test]
    fn empty_t3_labels_become_none() {
        let c = parse(
            r#"{"id":"1","language":"en","text":"x","paragraphs":[{"para_id":1,"text":"a","labels_t3":[]},{"para_id":2,"text":"b"}]}"#,
        )
        .unwrap();
        let p = &c.documents[0].paragraphs;
        assert_eq!(p[0].labels_t3.as_deref(), Some(&[NONE_LABEL.to_string()][..]));
        assert_eq!(p[1].labels_t3, None);
        assert_eq!(c.labeled_units(Task::T3).len(), 1);
        assert_eq!(c.labeled_units(Task::T3)[0].id, "1#1");
    }

    #[test]
    fn none_mixed_with_labels_rejected() {
        let s = r#"{"id":"1","language":"en","text":"x","paragraphs":[{"para_id":1,"text":"a","labels_t3":["None","Repetition"]}]}"#;
        assert!(parse(s).is_err());
    }

    #[test]
    fn para_ids_must_increase() {
        let s = r#"{"id":"1","language":"en","text":"x","paragraphs":[{"para_id":2,"text":"a"},{"para_id":2,"text":"b"}]}"#;
        assert!(parse(s).is_err());
    }

    #[test]
    fn task_filter_drops_labels() {
        let c = parse_corpus(
            r#"{"id":"1","language":"en","text":"x","labels_t1":"a","labels_t2":["b"]}"#,
            Path::new("m"),
            Some(&[Task::T2]),
        )
        .unwrap();
        assert_eq!(c.documents[0].labels_t1, None);
        assert!(c.documents[0].labels_t2.is_some());
    }

    #[test]
    fn merge_rejects_duplicates() {
        let mut a = parse(r#"{"id":"1","language":"en","text":"x"}"#).unwrap();
        let b = parse(r#"{"id":"1","language":"en","text":"y"}"#).unwrap();
        assert!(a.merge(b).is_err());
    }

    #[test]
    fn stats_single_document() {
        let c = parse(r#"{"id":"1","language":"en","text":"a b c","labels_t1":"x"}"#)
            .unwrap()
            .preprocessed();
        let s = token_stats(&c, Task::T1).unwrap();
        assert_eq!((s.min_tokens, s.max_tokens, s.avg_tokens), (3, 3, 3.0));
    }

    #[test]
    fn stats_over_paragraphs() {
        let c = parse(
            r#"{"id":"1","language":"en","text":"x","paragraphs":[{"para_id":1,"text":"a b c","labels_t3":[]},{"para_id":2,"text":"a b c d e","labels_t3":["R"]}]}"#,
        )
        .unwrap()
        .preprocessed();
        let s = token_stats(&c, Task::T3).unwrap();
        assert_eq!((s.min_tokens, s.max_tokens, s.avg_tokens), (3, 5, 4.0));
    }

    #[test]
    fn stats_rejects_empty_and_raw() {
        let raw = parse(r#"{"id":"1","language":"en","text":"a","labels_t1":"x"}"#).unwrap();
        assert!(token_stats(&raw, Task::T1).is_err());
        let c = raw.preprocessed();
        assert!(token_stats(&c, Task::T2).is_err());
    }

    #[test]
    fn save_and_reload_preserves_records() {
        let s = r#"{"id":"1","language":"en","text":"Hello!","labels_t1":"a","paragraphs":[{"para_id":1,"text":"Hello!","labels_t3":[]}]}"#;
        let c = parse(s).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.jsonl");
        c.save_jsonl(&path).unwrap();
        assert_eq!(load_corpus(&path, None).unwrap(), c);
    }
}
