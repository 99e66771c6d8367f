use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Label given to T3 paragraphs that carry no technique.
pub const NONE_LABEL: &str = "None";

/// The three classification tasks: genre (T1), framing (T2), persuasion techniques (T3).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Task {
    T1,
    T2,
    T3,
}

impl Task {
    pub const ALL: [Task; 3] = [Task::T1, Task::T2, Task::T3];

    pub fn mode(self) -> Mode {
        match self {
            Task::T1 => Mode::Multiclass,
            Task::T2 | Task::T3 => Mode::Multilabel,
        }
    }

    pub fn ordinal(self) -> u64 {
        match self {
            Task::T1 => 0,
            Task::T2 => 1,
            Task::T3 => 2,
        }
    }

    /// Whether the task's units are paragraphs rather than whole articles.
    pub fn is_paragraph_level(self) -> bool {
        self == Task::T3
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Task::T1 => "T1",
            Task::T2 => "T2",
            Task::T3 => "T3",
        };
        f.write_str(s)
    }
}

impl FromStr for Task {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "T1" => Ok(Task::T1),
            "T2" => Ok(Task::T2),
            "T3" => Ok(Task::T3),
            other => Err(Error::InvalidArgument(format!("unknown task {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Multiclass,
    Multilabel,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Mode::Multiclass => f.write_str("multiclass"),
            Mode::Multilabel => f.write_str("multilabel"),
        }
    }
}

/// Ordered label set of one task together with per-label sample counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelSpace {
    pub task: Task,
    pub labels: Vec<String>,
    pub mode: Mode,
    pub counts: Vec<usize>,
}

impl LabelSpace {
    /// Builds a space from the label sets of the task's units. Labels are sorted
    /// lexicographically; counts are the number of units carrying each label.
    pub fn from_label_sets<'a, I, S>(task: Task, sets: I) -> Result<Self>
    where
        I: IntoIterator<Item = &'a [S]>,
        S: AsRef<str> + 'a,
    {
        let mut counts: BTreeMap<String, usize> = BTreeMap::new();
        for set in sets {
            if task.mode() == Mode::Multiclass && set.len() != 1 {
                return Err(Error::Validation(format!(
                    "{task} is multiclass but a unit carries {} labels",
                    set.len()
                )));
            }
            for label in set {
                *counts.entry(label.as_ref().to_string()).or_default() += 1;
            }
        }
        let (labels, counts) = counts.into_iter().unzip();
        Ok(LabelSpace {
            task,
            labels,
            mode: task.mode(),
            counts,
        })
    }

    /// A space over a fixed label list; counts are taken from `sets` and may be zero.
    pub fn with_labels<'a, I, S>(task: Task, labels: Vec<String>, sets: I) -> Result<Self>
    where
        I: IntoIterator<Item = &'a [S]>,
        S: AsRef<str> + 'a,
    {
        let mut space = LabelSpace {
            task,
            counts: vec![0; labels.len()],
            labels,
            mode: task.mode(),
        };
        for (i, l) in space.labels.iter().enumerate() {
            if space.labels[..i].contains(l) {
                return Err(Error::Validation(format!("duplicate label {l:?} in {task}")));
            }
        }
        for set in sets {
            for label in set {
                let j = space.index_of(label.as_ref())?;
                space.counts[j] += 1;
            }
        }
        Ok(space)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn index_of(&self, label: &str) -> Result<usize> {
        self.labels
            .iter()
            .position(|l| l == label)
            .ok_or_else(|| Error::Validation(format!("label {label:?} not in {} label space", self.task)))
    }

    /// Index of the synthetic None label, present only for T3.
    pub fn none_index(&self) -> Option<usize> {
        if self.task == Task::T3 {
            self.labels.iter().position(|l| l == NONE_LABEL)
        } else {
            None
        }
    }

    /// Same labels with counts recomputed over a subset of units given as index sets.
    pub fn recount(&self, label_sets: &[Vec<usize>]) -> LabelSpace {
        let mut counts = vec![0; self.labels.len()];
        for set in label_sets {
            for &j in set {
                counts[j] += 1;
            }
        }
        LabelSpace {
            counts,
            ..self.clone()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn space_is_sorted_with_counts() {
        let sets: Vec<Vec<&str>> = vec![vec!["satire"], vec!["opinion"], vec!["opinion"]];
        let space = LabelSpace::from_label_sets(Task::T1, sets.iter().map(|s| s.as_slice())).unwrap();
        assert_eq!(space.labels, vec!["opinion", "satire"]);
        assert_eq!(space.counts, vec![2, 1]);
        assert_eq!(space.mode, Mode::Multiclass);
    }

    #[test]
    fn multiclass_rejects_multi_label_units() {
        let sets: Vec<Vec<&str>> = vec![vec!["a", "b"]];
        assert!(LabelSpace::from_label_sets(Task::T1, sets.iter().map(|s| s.as_slice())).is_err());
    }

    #[test]
    fn none_index_only_for_t3() {
        let sets: Vec<Vec<&str>> = vec![vec![NONE_LABEL], vec!["Repetition"]];
        let t3 = LabelSpace::from_label_sets(Task::T3, sets.iter().map(|s| s.as_slice())).unwrap();
        assert_eq!(t3.none_index(), Some(0));
        let t2 = LabelSpace::from_label_sets(Task::T2, sets.iter().map(|s| s.as_slice())).unwrap();
        assert_eq!(t2.none_index(), None);
    }

    #[test]
    fn task_parses_case_insensitively() {
        assert_eq!("t2".parse::<Task>().unwrap(), Task::T2);
        assert!("T4".parse::<Task>().is_err());
    }
}
