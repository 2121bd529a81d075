use log::warn;

use super::cooccurrence::{npmi, CooccurrenceStats, EPSILON};
use crate::topics::{Topic, TopicSet};

/// A coherence score together with the number of word pairs (or words, for
/// C_v) that were skipped because a word never occurs in the reference corpus.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Coherence {
    pub value: f64,
    pub skipped: usize,
}

fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        0.0
    } else {
        values.iter().sum::<f64>() / values.len() as f64
    }
}

fn over_topics(topics: &TopicSet, label: &str, mut score: impl FnMut(&Topic) -> (f64, usize)) -> Option<Coherence> {
    if topics.is_empty() {
        return None;
    }
    let mut skipped = 0;
    let values: Vec<f64> = topics
        .topics
        .iter()
        .map(|t| {
            let (v, s) = score(t);
            skipped += s;
            v
        })
        .collect();
    if skipped > 0 {
        warn!("{label}: skipped {skipped} entries with words unseen in the reference corpus");
    }
    Some(Coherence {
        value: mean(&values),
        skipped,
    })
}

/// Per topic, the mean over ordered word pairs `i > j` of
/// `ln((pair_df(w_i, w_j) + 1) / df(w_j))`; the set score is the mean over topics.
pub fn umass_topic(topic: &Topic, stats: &CooccurrenceStats) -> (f64, usize) {
    let words: Vec<&str> = topic.terms().collect();
    let mut values = Vec::new();
    let mut skipped = 0;
    for i in 1..words.len() {
        for j in 0..i {
            let dj = stats.df(words[j]);
            if dj == 0 || stats.df(words[i]) == 0 {
                skipped += 1;
                continue;
            }
            values.push(((stats.pair_df(words[i], words[j]) as f64 + 1.0) / dj as f64).ln());
        }
    }
    (mean(&values), skipped)
}

/// Mean NPMI over unordered top-word pairs of one topic.
pub fn npmi_topic(topic: &Topic, stats: &CooccurrenceStats) -> (f64, usize) {
    let words: Vec<&str> = topic.terms().collect();
    let mut values = Vec::new();
    let mut skipped = 0;
    for i in 0..words.len() {
        for j in i + 1..words.len() {
            match npmi(stats, words[i], words[j], EPSILON) {
                Ok(v) => values.push(v),
                Err(_) => skipped += 1,
            }
        }
    }
    (mean(&values), skipped)
}

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

/// C_v of one topic: each word `w` of the (seen) word set `W` gets the vector
/// `[NPMI(w, w_j)]` over `w_j` in `W`; the score is the mean cosine between
/// those vectors and their sum.
pub fn cv_topic(topic: &Topic, stats: &CooccurrenceStats) -> (f64, usize) {
    let (words, unseen): (Vec<&str>, Vec<&str>) = topic.terms().partition(|w| stats.contains(w));
    let vectors: Vec<Vec<f64>> = words
        .iter()
        .map(|a| {
            words
                .iter()
                .map(|b| npmi(stats, a, b, EPSILON).expect("words are seen"))
                .collect()
        })
        .collect();
    let mut context = vec![0.0; words.len()];
    for v in &vectors {
        for (c, x) in context.iter_mut().zip(v) {
            *c += x;
        }
    }
    let sims: Vec<f64> = vectors.iter().map(|v| cosine(v, &context)).collect();
    (mean(&sims), unseen.len())
}

/// UMass coherence; `None` for an empty topic set.
pub fn coherence_umass(topics: &TopicSet, stats: &CooccurrenceStats) -> Option<Coherence> {
    over_topics(topics, "umass", |t| umass_topic(t, stats))
}

/// NPMI coherence; single-word topics score 0.
pub fn coherence_npmi(topics: &TopicSet, stats: &CooccurrenceStats) -> Option<Coherence> {
    over_topics(topics, "npmi", |t| npmi_topic(t, stats))
}

/// C_v coherence; expects window-mode stats.
pub fn coherence_cv(topics: &TopicSet, stats: &CooccurrenceStats) -> Option<Coherence> {
    if stats.window().is_none() {
        warn!("c_v computed from document-level statistics");
    }
    over_topics(topics, "c_v", |t| cv_topic(t, stats))
}
