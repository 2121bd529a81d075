//! Aligning topics across slices by word-set Jaccard similarity.

use std::cmp::Ordering;
use std::collections::{BTreeSet, HashMap};

use crate::topics::{Topic, TopicSet};

/// Jaccard similarity of two topics' word sets; two empty sets count as identical.
pub fn jaccard(a: &Topic, b: &Topic) -> f64 {
    let (sa, sb) = (a.word_set(), b.word_set());
    let union = sa.union(&sb).count();
    if union == 0 {
        return 1.0;
    }
    sa.intersection(&sb).count() as f64 / union as f64
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TopicMatch {
    pub prev: u32,
    pub curr: u32,
    pub similarity: f64,
}

/// Greedy one-to-one matching: repeatedly takes the most similar unmatched
/// pair (ties to lowest prev id, then lowest curr id) until no remaining
/// pair reaches `threshold`. Output is sorted by similarity descending.
pub fn match_topics(prev: &TopicSet, curr: &TopicSet, threshold: f64) -> Vec<TopicMatch> {
    let mut pairs: Vec<TopicMatch> = Vec::with_capacity(prev.len() * curr.len());
    for p in &prev.topics {
        for c in &curr.topics {
            let similarity = jaccard(p, c);
            if similarity >= threshold {
                pairs.push(TopicMatch {
                    prev: p.id,
                    curr: c.id,
                    similarity,
                });
            }
        }
    }
    pairs.sort_by(|a, b| {
        b.similarity
            .partial_cmp(&a.similarity)
            .unwrap_or(Ordering::Equal)
            .then(a.prev.cmp(&b.prev))
            .then(a.curr.cmp(&b.curr))
    });
    let mut used_prev = BTreeSet::new();
    let mut used_curr = BTreeSet::new();
    pairs
        .into_iter()
        .filter(|m| {
            if used_prev.contains(&m.prev) || used_curr.contains(&m.curr) {
                return false;
            }
            used_prev.insert(m.prev);
            used_curr.insert(m.curr);
            true
        })
        .collect()
}

/// Collapses repeated words inside each topic (keeping the highest weight)
/// and then topics with identical word sets (keeping the lowest id).
pub fn dedupe_topics(set: &TopicSet) -> TopicSet {
    let mut topics: Vec<Topic> = set
        .topics
        .iter()
        .map(|t| {
            let mut best: HashMap<&str, f64> = HashMap::new();
            for (w, weight) in &t.words {
                let e = best.entry(w.as_str()).or_insert(*weight);
                if *weight > *e {
                    *e = *weight;
                }
            }
            let words = best.into_iter().map(|(w, x)| (w.to_string(), x)).collect();
            Topic::new(t.id, words)
        })
        .collect();
    let mut order: Vec<usize> = (0..topics.len()).collect();
    order.sort_by_key(|&i| topics[i].id);
    let mut keep = vec![false; topics.len()];
    let mut seen: BTreeSet<Vec<String>> = BTreeSet::new();
    for i in order {
        let key: Vec<String> = topics[i].word_set().into_iter().map(String::from).collect();
        keep[i] = seen.insert(key);
    }
    let mut flags = keep.into_iter();
    topics.retain(|_| flags.next().unwrap_or(false));
    TopicSet {
        topics,
        ..set.clone()
    }
}
