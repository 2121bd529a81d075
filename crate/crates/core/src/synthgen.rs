//! Synthetic time-sliced corpora drawn from planted topic-word distributions.

use std::collections::BTreeSet;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use chrono::{Months, NaiveDate};
use pathfinding::kuhn_munkres::kuhn_munkres;
use pathfinding::matrix::Matrix;
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Gamma;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backend::native::mix;
use crate::corpus::{Document, Granularity, TimeSlice};
use crate::topics::{Topic, TopicSet};

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid synthetic corpus spec: {0}")]
    Invalid(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// How planted topics spread over the vocabulary.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Support {
    /// The vocabulary is split into `K` contiguous blocks, uniform within each.
    Disjoint,
    /// Each topic is a symmetric Dirichlet draw over the whole vocabulary.
    Dirichlet { concentration: f64 },
}

/// How planted topics change across slices. Drifting topics move onto a
/// second vocabulary of `V` words disjoint from the first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Drift {
    None,
    /// Slice `s` mixes the two vocabularies with weight `(s - 1) / (S - 1)` on the second.
    Linear,
    /// Slices from this 1-based index on use only the second vocabulary.
    ShiftAt(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSpec {
    pub vocab_size: usize,
    pub topics: usize,
    pub slices: usize,
    pub docs_per_slice: usize,
    pub doc_len_min: usize,
    pub doc_len_max: usize,
    /// Symmetric Dirichlet parameter of per-document topic mixtures.
    pub mixture_alpha: f64,
    pub support: Support,
    pub drift: Drift,
    /// Month of the first slice.
    pub start: NaiveDate,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            vocab_size: 30,
            topics: 3,
            slices: 5,
            docs_per_slice: 300,
            doc_len_min: 8,
            doc_len_max: 40,
            mixture_alpha: 0.1,
            support: Support::Disjoint,
            drift: Drift::None,
            start: NaiveDate::from_ymd_opt(2020, 1, 1).expect("valid date"),
            seed: 0,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: String| Err(SynthError::Invalid(m));
        if self.vocab_size == 0 || self.topics == 0 || self.slices == 0 || self.docs_per_slice == 0 {
            return bad("vocab_size, topics, slices and docs_per_slice must be positive".into());
        }
        if self.doc_len_min == 0 || self.doc_len_min > self.doc_len_max {
            return bad(format!(
                "document length range [{}, {}] is empty or starts at 0",
                self.doc_len_min, self.doc_len_max
            ));
        }
        if !(self.mixture_alpha > 0.0 && self.mixture_alpha.is_finite()) {
            return bad(format!("mixture_alpha must be positive, got {}", self.mixture_alpha));
        }
        match self.support {
            Support::Disjoint if self.topics > self.vocab_size => {
                return bad(format!(
                    "{} disjoint topics need at least as many words, got {}",
                    self.topics, self.vocab_size
                ))
            }
            Support::Dirichlet { concentration } if !(concentration > 0.0 && concentration.is_finite()) => {
                return bad(format!("concentration must be positive, got {concentration}"))
            }
            _ => {}
        }
        if let Drift::ShiftAt(s) = self.drift {
            if s < 2 || s > self.slices {
                return bad(format!("shift_at must lie in [2, {}], got {s}", self.slices));
            }
        }
        Ok(())
    }

    fn uses_second_vocab(&self) -> bool {
        self.drift != Drift::None
    }

    /// Total distinct synthetic tokens the corpus can contain.
    pub fn total_vocab(&self) -> usize {
        if self.uses_second_vocab() {
            2 * self.vocab_size
        } else {
            self.vocab_size
        }
    }

    pub fn word(&self, id: usize) -> String {
        let width = (self.total_vocab().saturating_sub(1)).to_string().len().max(3);
        format!("w{id:0width$}")
    }
}

/// One planted topic as a distribution over synthetic words (non-zero
/// entries only, by weight descending then word).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantedTopic {
    pub id: u32,
    pub words: Vec<(String, f64)>,
}

/// Ground truth of one slice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantedSlice {
    pub slice_index: usize,
    pub label: String,
    pub topics: Vec<PlantedTopic>,
}

impl PlantedSlice {
    /// The planted topics truncated to their `top_n` heaviest words.
    pub fn top_topics(&self, top_n: usize) -> TopicSet {
        let topics = self
            .topics
            .iter()
            .map(|t| Topic {
                id: t.id,
                words: t.words.iter().take(top_n).cloned().collect(),
            })
            .collect();
        TopicSet::new("planted", self.slice_index, top_n, topics)
    }
}

/// Per-document mixture used during generation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DocTruth {
    pub doc_id: String,
    pub mixture: Vec<f64>,
}

impl DocTruth {
    /// Planted topic with the largest mixture weight (ties to the lowest id).
    pub fn dominant(&self) -> usize {
        let mut best = 0;
        for (k, &w) in self.mixture.iter().enumerate() {
            if w > self.mixture[best] {
                best = k;
            }
        }
        best
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthCorpus {
    pub slices: Vec<TimeSlice>,
    pub truth: Vec<PlantedSlice>,
    pub mixtures: Vec<DocTruth>,
}

impl SynthCorpus {
    pub fn documents(&self) -> Vec<Document> {
        self.slices.iter().flat_map(|s| s.documents.iter().cloned()).collect()
    }
}

fn dirichlet(rng: &mut ChaCha8Rng, alpha: f64, k: usize) -> Vec<f64> {
    let gamma = Gamma::new(alpha, 1.0).expect("alpha validated positive");
    let draws: Vec<f64> = (0..k).map(|_| gamma.sample(rng)).collect();
    let total: f64 = draws.iter().sum();
    if total > 0.0 && total.is_finite() {
        return draws.into_iter().map(|x| x / total).collect();
    }
    // every gamma draw underflowed: all mass on one component
    let mut v = vec![0.0; k];
    v[rng.random_range(0..k)] = 1.0;
    v
}

/// Base distributions over the first vocabulary (ids `0..V`).
fn base_topics(spec: &SynthSpec, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let (v, k) = (spec.vocab_size, spec.topics);
    match spec.support {
        Support::Disjoint => (0..k)
            .map(|t| {
                let (lo, hi) = (t * v / k, (t + 1) * v / k);
                let mut p = vec![0.0; v];
                for x in &mut p[lo..hi] {
                    *x = 1.0 / (hi - lo) as f64;
                }
                p
            })
            .collect(),
        Support::Dirichlet { concentration } => (0..k).map(|_| dirichlet(rng, concentration, v)).collect(),
    }
}

/// Distribution of every topic over the full vocabulary at slice `s` (1-based).
fn slice_topics(spec: &SynthSpec, base: &[Vec<f64>], s: usize) -> Vec<Vec<f64>> {
    let v = spec.vocab_size;
    let shift = match spec.drift {
        Drift::None => 0.0,
        Drift::Linear if spec.slices > 1 => (s - 1) as f64 / (spec.slices - 1) as f64,
        Drift::Linear => 0.0,
        Drift::ShiftAt(at) => {
            if s >= at {
                1.0
            } else {
                0.0
            }
        }
    };
    base.iter()
        .map(|p| {
            let mut full = vec![0.0; spec.total_vocab()];
            for (w, &x) in p.iter().enumerate() {
                full[w] += (1.0 - shift) * x;
                if spec.uses_second_vocab() {
                    full[v + w] += shift * x;
                }
            }
            full
        })
        .collect()
}

fn planted(spec: &SynthSpec, dists: &[Vec<f64>]) -> Vec<PlantedTopic> {
    dists
        .iter()
        .enumerate()
        .map(|(k, p)| {
            let words = p
                .iter()
                .enumerate()
                .filter(|(_, &x)| x > 0.0)
                .map(|(w, &x)| (spec.word(w), x))
                .collect();
            let t = Topic::new(k as u32, words);
            PlantedTopic { id: t.id, words: t.words }
        })
        .collect()
}

/// Samples the corpus: per document a topic mixture from the symmetric
/// Dirichlet prior, a length uniform in `[doc_len_min, doc_len_max]`, and
/// for each token a topic from the mixture and a word from that topic's
/// distribution at the document's slice. Slices are monthly from `start`.
pub fn generate(spec: &SynthSpec) -> Result<SynthCorpus, SynthError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let base = base_topics(spec, &mut rng);
    let mut slices = Vec::with_capacity(spec.slices);
    let mut truth = Vec::with_capacity(spec.slices);
    let mut mixtures = Vec::with_capacity(spec.slices * spec.docs_per_slice);
    for s in 1..=spec.slices {
        let date = spec
            .start
            .checked_add_months(Months::new((s - 1) as u32))
            .ok_or_else(|| SynthError::Invalid("slice dates overflow the calendar".into()))?;
        let label = Granularity::Month.label_of(date);
        let dists = slice_topics(spec, &base, s);
        let samplers: Vec<WeightedIndex<f64>> = dists
            .iter()
            .map(|p| WeightedIndex::new(p).expect("planted distributions have positive mass"))
            .collect();
        let mut rng = ChaCha8Rng::seed_from_u64(mix(spec.seed, s as u64));
        let mut documents = Vec::with_capacity(spec.docs_per_slice);
        for d in 0..spec.docs_per_slice {
            let id = format!("s{s:02}-d{d:05}");
            let theta = dirichlet(&mut rng, spec.mixture_alpha, spec.topics);
            let pick = WeightedIndex::new(&theta).expect("mixture has positive mass");
            let len = rng.random_range(spec.doc_len_min..=spec.doc_len_max);
            let words: Vec<String> = (0..len)
                .map(|_| spec.word(samplers[pick.sample(&mut rng)].sample(&mut rng)))
                .collect();
            let doc = Document::new(id.clone(), date, words.join(" ")).expect("synthetic text is non-empty");
            documents.push(doc);
            mixtures.push(DocTruth { doc_id: id, mixture: theta });
        }
        truth.push(PlantedSlice {
            slice_index: s,
            label: label.clone(),
            topics: planted(spec, &dists),
        });
        slices.push(TimeSlice {
            index: s,
            label,
            documents,
        });
    }
    Ok(SynthCorpus { slices, truth, mixtures })
}

/// One JSON object per slice and planted topic.
pub fn write_truth_jsonl(truth: &[PlantedSlice], path: &Path) -> Result<(), SynthError> {
    #[derive(Serialize)]
    struct Line<'a> {
        slice_index: usize,
        label: &'a str,
        topic: u32,
        words: &'a [(String, f64)],
    }
    let mut out = BufWriter::new(File::create(path)?);
    for slice in truth {
        for t in &slice.topics {
            let line = Line {
                slice_index: slice.slice_index,
                label: &slice.label,
                topic: t.id,
                words: &t.words,
            };
            serde_json::to_writer(&mut out, &line)?;
            out.write_all(b"\n")?;
        }
    }
    out.flush()?;
    Ok(())
}

/// Matches extracted topics one-to-one to planted topics so that the summed
/// top-`top_n` overlap is maximal, then averages over extracted topics the
/// fraction of each topic's top words found in its partner's top words.
/// Unmatched extracted topics contribute 0. `None` when nothing was extracted.
pub fn score_recovery(extracted: &TopicSet, planted: &TopicSet, top_n: usize) -> Option<f64> {
    let ex: Vec<BTreeSet<&str>> = extracted
        .topics
        .iter()
        .map(|t| t.terms().take(top_n).collect())
        .collect();
    let pl: Vec<BTreeSet<&str>> = planted.topics.iter().map(|t| t.terms().take(top_n).collect()).collect();
    if ex.is_empty() {
        return None;
    }
    let n = ex.len().max(pl.len());
    let overlap = |i: usize, j: usize| -> i64 {
        match (ex.get(i), pl.get(j)) {
            (Some(a), Some(b)) => a.intersection(b).count() as i64,
            _ => 0,
        }
    };
    let weights = Matrix::from_fn(n, n, |(i, j)| overlap(i, j));
    let (_, assignment) = kuhn_munkres(&weights);
    let total: f64 = ex
        .iter()
        .enumerate()
        .map(|(i, words)| {
            if words.is_empty() {
                0.0
            } else {
                overlap(i, assignment[i]) as f64 / words.len() as f64
            }
        })
        .sum();
    Some(total / ex.len() as f64)
}
