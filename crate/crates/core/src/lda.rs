//! Chained LDA by collapsed Gibbs sampling.
//!
//! Each time slice gets its own sampler run. Topic-word counts of the
//! previous slice are carried into the next one after scaling by a decay
//! factor ([`LdaState::chain_update`]); the carried counts act as fixed
//! pseudo-observations in the conditional
//!
//! ```text
//! p(z_i = k) ∝ (n_dk + alpha) * (m_kw + beta) / (m_k + V * beta)
//! ```
//!
//! where `m` holds carried plus current-slice counts with token `i` removed.

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use log::warn;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::topics::{Topic, TopicSet};
use crate::vectorize::Vocabulary;

#[derive(Debug, Error)]
pub enum LdaError {
    #[error("invalid LDA parameters: {0}")]
    InvalidParams(String),
    #[error("prior state does not fit this model: {0}")]
    PriorMismatch(String),
    #[error("checkpoint io: {0}")]
    Io(#[from] std::io::Error),
    #[error("checkpoint format: {0}")]
    Format(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LdaParams {
    pub topics: usize,
    pub alpha: f64,
    pub beta: f64,
}

impl Default for LdaParams {
    fn default() -> Self {
        LdaParams {
            topics: 6,
            alpha: 0.1,
            beta: 0.01,
        }
    }
}

impl LdaParams {
    pub fn validate(&self) -> Result<(), LdaError> {
        if self.topics == 0 {
            return Err(LdaError::InvalidParams("topics must be at least 1".into()));
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) || !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(LdaError::InvalidParams("alpha and beta must be positive".into()));
        }
        Ok(())
    }
}

/// Topic-word statistics of a fitted (or carried) model. Counts are real
/// valued because carried counts are decayed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LdaState {
    pub topics: usize,
    pub alpha: f64,
    pub beta: f64,
    pub vocab_size: usize,
    pub seed: u64,
    /// Row-major `topics x vocab_size`.
    topic_word: Vec<f64>,
    topic_totals: Vec<f64>,
}

impl LdaState {
    pub fn new(params: &LdaParams, vocab_size: usize, seed: u64) -> Self {
        LdaState {
            topics: params.topics,
            alpha: params.alpha,
            beta: params.beta,
            vocab_size,
            seed,
            topic_word: vec![0.0; params.topics * vocab_size],
            topic_totals: vec![0.0; params.topics],
        }
    }

    /// Builds a state from explicit `topics x vocab_size` counts.
    pub fn from_counts(params: &LdaParams, counts: Vec<Vec<f64>>, seed: u64) -> Result<Self, LdaError> {
        params.validate()?;
        if counts.len() != params.topics {
            return Err(LdaError::InvalidParams(format!(
                "expected {} topic rows, got {}",
                params.topics,
                counts.len()
            )));
        }
        let vocab_size = counts.first().map_or(0, Vec::len);
        if counts.iter().any(|r| r.len() != vocab_size || r.iter().any(|c| *c < 0.0 || !c.is_finite())) {
            return Err(LdaError::InvalidParams("rows must share a length and hold non-negative counts".into()));
        }
        let mut state = LdaState::new(params, vocab_size, seed);
        state.topic_word = counts.into_iter().flatten().collect();
        state.recompute_totals();
        Ok(state)
    }

    pub fn params(&self) -> LdaParams {
        LdaParams {
            topics: self.topics,
            alpha: self.alpha,
            beta: self.beta,
        }
    }

    /// Count of word `w` in topic `k`; zero for words beyond this state's vocabulary.
    pub fn count(&self, k: usize, w: usize) -> f64 {
        if w < self.vocab_size {
            self.topic_word[k * self.vocab_size + w]
        } else {
            0.0
        }
    }

    pub fn topic_total(&self, k: usize) -> f64 {
        self.topic_totals[k]
    }

    pub fn topic_row(&self, k: usize) -> &[f64] {
        &self.topic_word[k * self.vocab_size..(k + 1) * self.vocab_size]
    }

    fn recompute_totals(&mut self) {
        let v = self.vocab_size;
        self.topic_totals = (0..self.topics)
            .map(|k| self.topic_word[k * v..(k + 1) * v].iter().sum())
            .collect();
    }

    /// True when every topic total matches its row sum within `1e-9` relative.
    pub fn totals_consistent(&self) -> bool {
        (0..self.topics).all(|k| {
            let sum: f64 = self.topic_row(k).iter().sum();
            (sum - self.topic_totals[k]).abs() <= 1e-9 * sum.abs().max(1.0)
        })
    }

    /// Widens the vocabulary, appending zero columns.
    pub fn grow(&self, vocab_size: usize) -> LdaState {
        assert!(vocab_size >= self.vocab_size, "vocabulary cannot shrink");
        let mut out = self.clone();
        out.vocab_size = vocab_size;
        out.topic_word = Vec::with_capacity(self.topics * vocab_size);
        for k in 0..self.topics {
            out.topic_word.extend_from_slice(self.topic_row(k));
            out.topic_word.resize((k + 1) * vocab_size, 0.0);
        }
        out
    }

    /// Scales all topic-word counts by `decay`; the result seeds the next slice.
    pub fn chain_update(&self, decay: f64) -> LdaState {
        assert!((0.0..=1.0).contains(&decay), "decay must lie in [0, 1]");
        let mut out = self.clone();
        for c in &mut out.topic_word {
            *c *= decay;
        }
        out.recompute_totals();
        out
    }

    pub fn save_checkpoint(&self, path: &Path) -> Result<(), LdaError> {
        let ck = Checkpoint {
            format: CHECKPOINT_FORMAT.into(),
            version: CHECKPOINT_VERSION,
            state: self.clone(),
        };
        serde_json::to_writer(BufWriter::new(File::create(path)?), &ck)
            .map_err(|e| LdaError::Format(e.to_string()))
    }

    pub fn load_checkpoint(path: &Path) -> Result<LdaState, LdaError> {
        let ck: Checkpoint = serde_json::from_reader(BufReader::new(File::open(path)?))
            .map_err(|e| LdaError::Format(e.to_string()))?;
        if ck.format != CHECKPOINT_FORMAT || ck.version != CHECKPOINT_VERSION {
            return Err(LdaError::Format(format!(
                "unsupported checkpoint {} v{}",
                ck.format, ck.version
            )));
        }
        let s = ck.state;
        if s.topic_word.len() != s.topics * s.vocab_size || s.topic_totals.len() != s.topics {
            return Err(LdaError::Format("count array shape mismatch".into()));
        }
        Ok(s)
    }
}

const CHECKPOINT_FORMAT: &str = "topicbench-lda-state";
const CHECKPOINT_VERSION: u32 = 1;

/// JSON checkpoint: `{"format": "topicbench-lda-state", "version": 1, "state": {...}}`.
#[derive(Serialize, Deserialize)]
struct Checkpoint {
    format: String,
    version: u32,
    state: LdaState,
}

/// Per-token topic assignments of one slice fit.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SliceAssignment {
    /// In-vocabulary token ids per document.
    pub tokens: Vec<Vec<usize>>,
    pub z: Vec<Vec<usize>>,
    /// `doc_topic[d][k]` = tokens of document `d` assigned to topic `k`.
    pub doc_topic: Vec<Vec<u32>>,
}

impl SliceAssignment {
    fn empty(docs: usize, topics: usize) -> Self {
        SliceAssignment {
            tokens: vec![Vec::new(); docs],
            z: vec![Vec::new(); docs],
            doc_topic: vec![vec![0; topics]; docs],
        }
    }
}

struct Sampler {
    rng: ChaCha8Rng,
    weights: Vec<f64>,
}

impl Sampler {
    fn new(seed: u64, topics: usize) -> Self {
        Sampler {
            rng: ChaCha8Rng::seed_from_u64(seed),
            weights: vec![0.0; topics],
        }
    }

    /// Draws a topic from the unnormalized weights filled by `fill`.
    fn draw(&mut self, fill: impl Fn(usize) -> f64) -> usize {
        let mut total = 0.0;
        for (k, w) in self.weights.iter_mut().enumerate() {
            total += fill(k);
            *w = total;
        }
        let u = self.rng.random::<f64>() * total;
        self.weights.iter().position(|&c| u < c).unwrap_or(self.weights.len() - 1)
    }
}

/// Fits one slice. `prior` holds the carried counts (already decayed by
/// [`LdaState::chain_update`]); its vocabulary may be smaller than `vocab`.
/// Token assignments are initialized by sequential draws from the
/// conditional, so carried topics shape the starting point, then `iters`
/// full sweeps run and the final state is returned.
pub fn gibbs_fit(
    docs: &[Vec<String>],
    vocab: &Vocabulary,
    prior: Option<&LdaState>,
    params: &LdaParams,
    iters: usize,
    seed: u64,
) -> Result<(LdaState, SliceAssignment), LdaError> {
    params.validate()?;
    let v = vocab.len();
    let mut state = match prior {
        Some(p) => {
            if p.topics != params.topics {
                return Err(LdaError::PriorMismatch(format!(
                    "prior has {} topics, model has {}",
                    p.topics, params.topics
                )));
            }
            if p.vocab_size > v {
                return Err(LdaError::PriorMismatch(format!(
                    "prior vocabulary ({}) exceeds current vocabulary ({v})",
                    p.vocab_size
                )));
            }
            let mut s = p.grow(v);
            s.alpha = params.alpha;
            s.beta = params.beta;
            s
        }
        None => LdaState::new(params, v, seed),
    };
    state.seed = seed;

    let tokens: Vec<Vec<usize>> = docs.iter().map(|d| vocab.encode(d)).collect();
    let total_tokens: usize = tokens.iter().map(Vec::len).sum();
    if total_tokens == 0 {
        let unchanged = prior.cloned().unwrap_or(state);
        return Ok((unchanged, SliceAssignment::empty(docs.len(), params.topics)));
    }
    if params.topics > total_tokens {
        warn!(
            "{} topics requested for a slice with only {total_tokens} tokens",
            params.topics
        );
    }

    let k_count = params.topics;
    let (alpha, beta) = (params.alpha, params.beta);
    let v_beta = v as f64 * beta;
    let mut sampler = Sampler::new(seed, k_count);
    let mut doc_topic = vec![vec![0u32; k_count]; docs.len()];
    let mut z: Vec<Vec<usize>> = tokens.iter().map(|t| Vec::with_capacity(t.len())).collect();

    for (d, doc) in tokens.iter().enumerate() {
        for &w in doc {
            let nd = &doc_topic[d];
            let k = sampler.draw(|k| {
                (nd[k] as f64 + alpha) * (state.topic_word[k * v + w] + beta) / (state.topic_totals[k] + v_beta)
            });
            z[d].push(k);
            doc_topic[d][k] += 1;
            state.topic_word[k * v + w] += 1.0;
            state.topic_totals[k] += 1.0;
        }
    }

    for _ in 0..iters {
        for (d, doc) in tokens.iter().enumerate() {
            for (i, &w) in doc.iter().enumerate() {
                let old = z[d][i];
                doc_topic[d][old] -= 1;
                state.topic_word[old * v + w] -= 1.0;
                state.topic_totals[old] -= 1.0;

                let nd = &doc_topic[d];
                let k = sampler.draw(|k| {
                    (nd[k] as f64 + alpha) * (state.topic_word[k * v + w] + beta)
                        / (state.topic_totals[k] + v_beta)
                });

                z[d][i] = k;
                doc_topic[d][k] += 1;
                state.topic_word[k * v + w] += 1.0;
                state.topic_totals[k] += 1.0;
            }
        }
    }

    // Incremental +-1.0 updates on top of decayed reals drift; resum once.
    state.recompute_totals();
    Ok((
        state,
        SliceAssignment {
            tokens,
            z,
            doc_topic,
        },
    ))
}

/// Folds a single document into a fitted model without changing it: Gibbs
/// sweeps over the document's tokens with topic-word counts frozen.
/// Returns per-token topics and per-topic token counts.
pub fn infer_document(state: &LdaState, tokens: &[usize], iters: usize, seed: u64) -> (Vec<usize>, Vec<u32>) {
    let k_count = state.topics;
    let mut doc_topic = vec![0u32; k_count];
    if tokens.is_empty() {
        return (Vec::new(), doc_topic);
    }
    let v_beta = state.vocab_size as f64 * state.beta;
    let phi = |k: usize, w: usize| (state.count(k, w) + state.beta) / (state.topic_totals[k] + v_beta);
    let mut sampler = Sampler::new(seed, k_count);
    let mut z = Vec::with_capacity(tokens.len());
    for &w in tokens {
        let k = sampler.draw(|k| (doc_topic[k] as f64 + state.alpha) * phi(k, w));
        z.push(k);
        doc_topic[k] += 1;
    }
    for _ in 0..iters {
        for (i, &w) in tokens.iter().enumerate() {
            doc_topic[z[i]] -= 1;
            let k = sampler.draw(|k| (doc_topic[k] as f64 + state.alpha) * phi(k, w));
            z[i] = k;
            doc_topic[k] += 1;
        }
    }
    (z, doc_topic)
}

/// Ranks words per topic by `count + beta` (ties lexicographic) and keeps the
/// top `top_n`, weighted by `(count + beta) / (total + V * beta)`.
pub fn extract_topics(state: &LdaState, vocab: &Vocabulary, top_n: usize, slice_index: usize, backend: &str) -> TopicSet {
    let v = state.vocab_size.min(vocab.len());
    let mut n = top_n;
    if n > v {
        warn!("top_n = {top_n} exceeds vocabulary size {v}; clamping");
        n = v;
    }
    let denom_extra = state.vocab_size as f64 * state.beta;
    let topics = (0..state.topics)
        .map(|k| {
            let denom = state.topic_totals[k] + denom_extra;
            let mut ranked: Vec<usize> = (0..v).collect();
            ranked.sort_by(|&a, &b| {
                state
                    .count(k, b)
                    .partial_cmp(&state.count(k, a))
                    .unwrap_or(std::cmp::Ordering::Equal)
                    .then_with(|| vocab.term(a).cmp(vocab.term(b)))
            });
            let words = ranked
                .into_iter()
                .take(n)
                .map(|w| (vocab.term(w).to_string(), (state.count(k, w) + state.beta) / denom))
                .collect();
            Topic { id: k as u32, words }
        })
        .collect();
    TopicSet::new(backend, slice_index, top_n, topics)
}

/// Dominant topic per document: `argmax_k (n_dk + alpha)` with ties to the
/// lowest id, scored `(n_dk + alpha) / (len + K * alpha)`.
pub fn assign_documents(state: &LdaState, assignment: &SliceAssignment) -> Vec<(u32, f64)> {
    assignment
        .doc_topic
        .iter()
        .map(|counts| dominant_topic(counts, state.alpha))
        .collect()
}

pub(crate) fn dominant_topic(counts: &[u32], alpha: f64) -> (u32, f64) {
    let len: u32 = counts.iter().sum();
    let mut best = 0;
    for (k, &c) in counts.iter().enumerate() {
        if c > counts[best] {
            best = k;
        }
    }
    let score = (counts[best] as f64 + alpha) / (len as f64 + counts.len() as f64 * alpha);
    (best as u32, score)
}
