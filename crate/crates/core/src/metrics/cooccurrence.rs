use std::collections::{BTreeSet, HashMap, HashSet};

use super::MetricError;

/// Floor added to joint probabilities inside logarithms.
pub const EPSILON: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CountMode {
    /// Each document is one counting unit.
    Document,
    /// Each sliding window of this many tokens (stride 1) is one counting
    /// unit; documents no longer than the window form a single unit.
    Window(usize),
}

/// Document frequencies and joint document frequencies over a reference corpus.
#[derive(Debug, Clone, PartialEq)]
pub struct CooccurrenceStats {
    n_docs: usize,
    index: HashMap<String, u32>,
    df: Vec<u64>,
    pair_df: HashMap<(u32, u32), u64>,
    window: Option<usize>,
}

impl CooccurrenceStats {
    /// Counting units (`|β|`): documents, or windows in window mode.
    pub fn n_docs(&self) -> usize {
        self.n_docs
    }

    pub fn window(&self) -> Option<usize> {
        self.window
    }

    /// Units containing `word`; zero when unseen.
    pub fn df(&self, word: &str) -> u64 {
        self.index.get(word).map_or(0, |&i| self.df[i as usize])
    }

    /// Units containing both words; `pair_df(a, a) == df(a)`.
    pub fn pair_df(&self, a: &str, b: &str) -> u64 {
        let (Some(&ia), Some(&ib)) = (self.index.get(a), self.index.get(b)) else {
            return 0;
        };
        if ia == ib {
            return self.df[ia as usize];
        }
        self.pair_df.get(&(ia.min(ib), ia.max(ib))).copied().unwrap_or(0)
    }

    pub fn contains(&self, word: &str) -> bool {
        self.index.contains_key(word)
    }

    fn add_unit<'a>(&mut self, words: impl Iterator<Item = &'a str>) {
        self.n_docs += 1;
        let mut ids = BTreeSet::new();
        for w in words {
            let next = self.index.len() as u32;
            let id = *self.index.entry(w.to_string()).or_insert(next);
            if id as usize == self.df.len() {
                self.df.push(0);
            }
            ids.insert(id);
        }
        let ids: Vec<u32> = ids.into_iter().collect();
        for (i, &a) in ids.iter().enumerate() {
            self.df[a as usize] += 1;
            for &b in &ids[i + 1..] {
                *self.pair_df.entry((a, b)).or_insert(0) += 1;
            }
        }
    }
}

/// Counts word presence per document (or per window). With `vocab_filter`
/// only the listed words are tracked; every unit still counts towards `|β|`.
pub fn build_stats(
    docs: &[Vec<String>],
    vocab_filter: Option<&HashSet<String>>,
    mode: CountMode,
) -> Result<CooccurrenceStats, MetricError> {
    if let CountMode::Window(s) = mode {
        if s < 2 {
            return Err(MetricError::InvalidWindow(s));
        }
    }
    let mut stats = CooccurrenceStats {
        n_docs: 0,
        index: HashMap::new(),
        df: Vec::new(),
        pair_df: HashMap::new(),
        window: match mode {
            CountMode::Document => None,
            CountMode::Window(s) => Some(s),
        },
    };
    let keep = |w: &&String| vocab_filter.is_none_or(|f| f.contains(*w));
    for doc in docs {
        match mode {
            CountMode::Document => stats.add_unit(doc.iter().filter(keep).map(String::as_str)),
            CountMode::Window(s) => {
                if doc.is_empty() {
                    continue;
                }
                let span = s.min(doc.len());
                for window in doc.windows(span) {
                    stats.add_unit(window.iter().filter(keep).map(String::as_str));
                }
            }
        }
    }
    if stats.n_docs == 0 {
        return Err(MetricError::EmptyCorpus);
    }
    Ok(stats)
}

fn probabilities(stats: &CooccurrenceStats, a: &str, b: &str) -> Result<(f64, f64, f64), MetricError> {
    let n = stats.n_docs as f64;
    for w in [a, b] {
        if stats.df(w) == 0 {
            return Err(MetricError::UnseenWord(w.to_string()));
        }
    }
    Ok((
        stats.df(a) as f64 / n,
        stats.df(b) as f64 / n,
        stats.pair_df(a, b) as f64 / n,
    ))
}

/// `ln((P(a,b) + ε) / (P(a) P(b)))`.
pub fn pmi(stats: &CooccurrenceStats, a: &str, b: &str, epsilon: f64) -> Result<f64, MetricError> {
    let (pa, pb, pab) = probabilities(stats, a, b)?;
    Ok(((pab + epsilon) / (pa * pb)).ln())
}

/// PMI normalized by `-ln(P(a,b) + ε)` and clamped to `[-1, 1]`. A pair
/// present in every unit has `P(a,b) = 1`, where the normalizer vanishes;
/// it is scored 1 (perfect association).
pub fn npmi(stats: &CooccurrenceStats, a: &str, b: &str, epsilon: f64) -> Result<f64, MetricError> {
    let (pa, pb, pab) = probabilities(stats, a, b)?;
    let norm = -(pab + epsilon).ln();
    if norm <= 0.0 {
        return Ok(1.0);
    }
    let pmi = ((pab + epsilon) / (pa * pb)).ln();
    Ok((pmi / norm).clamp(-1.0, 1.0))
}
