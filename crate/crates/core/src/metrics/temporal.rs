use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::MetricError;
use crate::backend::{dedupe_topics, match_topics};
use crate::topics::TopicSet;

/// Unique words over the combined past and current top-word lists divided by
/// the total number of word slots in both collections.
pub fn evolution(past: &TopicSet, current: &TopicSet) -> Result<f64, MetricError> {
    let slots = past.word_slots() + current.word_slots();
    if slots == 0 {
        return Err(MetricError::EmptyEvolution);
    }
    let distinct: BTreeSet<&str> = past
        .topics
        .iter()
        .chain(&current.topics)
        .flat_map(|t| t.terms())
        .collect();
    Ok(distinct.len() as f64 / slots as f64)
}

/// Pairwise topic-set overlap between labelled slices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityMatrix {
    pub labels: Vec<String>,
    pub values: Vec<Vec<f64>>,
}

impl StabilityMatrix {
    /// Mean over the strict upper triangle; `None` with fewer than two labels.
    pub fn mean_off_diagonal(&self) -> Option<f64> {
        let n = self.labels.len();
        if n < 2 {
            return None;
        }
        let mut sum = 0.0;
        let mut count = 0usize;
        for i in 0..n {
            for j in i + 1..n {
                sum += self.values[i][j];
                count += 1;
            }
        }
        Some(sum / count as f64)
    }

    pub fn get(&self, a: &str, b: &str) -> Option<f64> {
        let i = self.labels.iter().position(|l| l == a)?;
        let j = self.labels.iter().position(|l| l == b)?;
        Some(self.values[i][j])
    }
}

/// Matched topics over `|T_i| + |T_j| - matched` for every pair of slices,
/// after removing duplicate topics. Two empty sets score 0.
pub fn stability_pair(a: &TopicSet, b: &TopicSet, threshold: f64) -> f64 {
    let (a, b) = (dedupe_topics(a), dedupe_topics(b));
    let matched = match_topics(&a, &b, threshold).len();
    let union = a.len() + b.len() - matched;
    if union == 0 {
        0.0
    } else {
        matched as f64 / union as f64
    }
}

pub fn stability(per_slice: &[(String, TopicSet)], threshold: f64) -> StabilityMatrix {
    let n = per_slice.len();
    let mut values = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in i..n {
            let v = stability_pair(&per_slice[i].1, &per_slice[j].1, threshold);
            values[i][j] = v;
            values[j][i] = v;
        }
    }
    StabilityMatrix {
        labels: per_slice.iter().map(|(l, _)| l.clone()).collect(),
        values,
    }
}
