//! Evaluation measures: coherence, diversity, density, evolution, stability.

mod coherence;
mod cooccurrence;
mod temporal;

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::topics::TopicSet;

pub use coherence::{coherence_cv, coherence_npmi, coherence_umass, cv_topic, npmi_topic, umass_topic, Coherence};
pub use cooccurrence::{build_stats, npmi, pmi, CooccurrenceStats, CountMode, EPSILON};
pub use temporal::{evolution, stability, stability_pair, StabilityMatrix};

/// Sliding window used for C_v statistics unless configured otherwise.
pub const DEFAULT_CV_WINDOW: usize = 110;

#[derive(Debug, Error)]
pub enum MetricError {
    #[error("reference corpus is empty")]
    EmptyCorpus,
    #[error("window size must be at least 2, got {0}")]
    InvalidWindow(usize),
    #[error("word `{0}` does not occur in the reference corpus")]
    UnseenWord(String),
    #[error("evolution needs at least one topic word in the past or current set")]
    EmptyEvolution,
}

/// Distinct words across all topics divided by the number of word slots.
/// `None` when there are no word slots.
pub fn diversity(topics: &TopicSet) -> Option<f64> {
    let slots = topics.word_slots();
    if slots == 0 {
        return None;
    }
    let distinct: BTreeSet<&str> = topics.topics.iter().flat_map(|t| t.terms()).collect();
    Some(distinct.len() as f64 / slots as f64)
}

/// Topics per document; `None` without documents.
pub fn density(topic_count: usize, doc_count: usize) -> Option<f64> {
    if doc_count == 0 {
        None
    } else {
        Some(topic_count as f64 / doc_count as f64)
    }
}

/// Measures for one increment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRecord {
    pub slice_index: usize,
    pub label: String,
    pub n_docs: usize,
    pub n_topics: usize,
    pub density: Option<f64>,
    pub diversity: Option<f64>,
    pub coherence_umass: Option<f64>,
    pub coherence_npmi: Option<f64>,
    pub coherence_cv: Option<f64>,
    pub fit_time_ms: f64,
}

/// Topic evolution of one month between two consecutive increments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvolutionRecord {
    pub month_label: String,
    pub increment_index: usize,
    pub past_count: usize,
    pub current_count: usize,
    pub tts: f64,
}

impl EvolutionRecord {
    /// `1 - tts`, the "reverse diversity" reading of evolution.
    pub fn inverted(&self) -> f64 {
        1.0 - self.tts
    }
}
