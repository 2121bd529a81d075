//! Topic and topic-set types shared by backends, metrics and reports.

use std::cmp::Ordering;
use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

/// A ranked list of top words with weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Topic {
    pub id: u32,
    pub words: Vec<(String, f64)>,
}

impl Topic {
    /// Builds a topic, ranking words by weight (descending, ties lexicographic).
    pub fn new(id: u32, mut words: Vec<(String, f64)>) -> Self {
        words.sort_by(rank_order);
        Topic { id, words }
    }

    pub fn from_words<S: AsRef<str>>(id: u32, words: &[S]) -> Self {
        let n = words.len().max(1) as f64;
        Topic {
            id,
            words: words
                .iter()
                .enumerate()
                .map(|(i, w)| (w.as_ref().to_string(), (words.len() - i) as f64 / n))
                .collect(),
        }
    }

    pub fn terms(&self) -> impl Iterator<Item = &str> {
        self.words.iter().map(|(w, _)| w.as_str())
    }

    pub fn word_set(&self) -> BTreeSet<&str> {
        self.terms().collect()
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }
}

/// Weight descending, then word ascending.
pub(crate) fn rank_order(a: &(String, f64), b: &(String, f64)) -> Ordering {
    b.1.partial_cmp(&a.1)
        .unwrap_or(Ordering::Equal)
        .then_with(|| a.0.cmp(&b.0))
}

/// The topics a backend emits for one increment (or attributes to one month).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicSet {
    pub slice_index: usize,
    pub top_n: usize,
    pub backend: String,
    pub topics: Vec<Topic>,
}

impl TopicSet {
    pub fn new(backend: impl Into<String>, slice_index: usize, top_n: usize, topics: Vec<Topic>) -> Self {
        TopicSet {
            slice_index,
            top_n,
            backend: backend.into(),
            topics,
        }
    }

    pub fn empty(backend: impl Into<String>, slice_index: usize, top_n: usize) -> Self {
        Self::new(backend, slice_index, top_n, Vec::new())
    }

    pub fn len(&self) -> usize {
        self.topics.len()
    }

    pub fn is_empty(&self) -> bool {
        self.topics.is_empty()
    }

    /// Total number of word slots across all topics.
    pub fn word_slots(&self) -> usize {
        self.topics.iter().map(Topic::len).sum()
    }

    pub fn topic(&self, id: u32) -> Option<&Topic> {
        self.topics.iter().find(|t| t.id == id)
    }

    /// Checks that topic ids are unique and no topic exceeds `top_n` words.
    pub fn validate(&self) -> Result<(), String> {
        let mut seen = BTreeSet::new();
        for t in &self.topics {
            if !seen.insert(t.id) {
                return Err(format!("duplicate topic id {}", t.id));
            }
            if t.len() > self.top_n {
                return Err(format!(
                    "topic {} has {} words, more than top_n = {}",
                    t.id,
                    t.len(),
                    self.top_n
                ));
            }
        }
        Ok(())
    }
}
