//! In-process backend running chained LDA over the incoming slices.

use std::collections::{BTreeSet, HashSet};

use serde::{Deserialize, Serialize};

use super::{Backend, BackendError, DocTopic, FitRequest, FitResponse, RequestDoc};
use crate::lda::{self, LdaParams, LdaState};
use crate::topics::{Topic, TopicSet};
use crate::vectorize::{tokenize, TokenizeOptions, VocabFilter, Vocabulary};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NativeLdaConfig {
    pub topics: usize,
    pub alpha: f64,
    pub beta: f64,
    /// Fraction of the previous slice's topic-word counts carried forward.
    pub decay: f64,
    /// Gibbs sweeps per slice.
    pub iters: usize,
    /// Fold-in sweeps per document when attributing topics to a month.
    pub infer_iters: usize,
    pub vocab: VocabFilter,
}

impl Default for NativeLdaConfig {
    fn default() -> Self {
        let p = LdaParams::default();
        NativeLdaConfig {
            topics: p.topics,
            alpha: p.alpha,
            beta: p.beta,
            decay: 0.5,
            iters: 200,
            infer_iters: 20,
            vocab: VocabFilter::default(),
        }
    }
}

impl NativeLdaConfig {
    pub fn params(&self) -> LdaParams {
        LdaParams {
            topics: self.topics,
            alpha: self.alpha,
            beta: self.beta,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        self.params().validate().map_err(|e| e.to_string())?;
        self.vocab.validate().map_err(|e| e.to_string())?;
        if !(0.0..=1.0).contains(&self.decay) {
            return Err(format!("decay {} outside [0, 1]", self.decay));
        }
        Ok(())
    }
}

pub struct NativeLda {
    name: String,
    config: NativeLdaConfig,
    seed: u64,
    stopwords: HashSet<String>,
    tokenize: TokenizeOptions,
    vocab: Vocabulary,
    state: Option<LdaState>,
    last_topics: Option<TopicSet>,
}

impl NativeLda {
    pub fn new(
        name: impl Into<String>,
        config: NativeLdaConfig,
        stopwords: HashSet<String>,
        tokenize: TokenizeOptions,
        seed: u64,
    ) -> Result<Self, BackendError> {
        config.validate().map_err(BackendError::Descriptor)?;
        Ok(NativeLda {
            name: name.into(),
            config,
            seed,
            stopwords,
            tokenize,
            vocab: Vocabulary::default(),
            state: None,
            last_topics: None,
        })
    }

    pub fn state(&self) -> Option<&LdaState> {
        self.state.as_ref()
    }

    pub fn vocabulary(&self) -> &Vocabulary {
        &self.vocab
    }

    fn tokens(&self, text: &str) -> Vec<String> {
        tokenize(text, &self.stopwords, &self.tokenize)
    }

    fn carry_over(&self, slice_index: usize) -> TopicSet {
        match &self.last_topics {
            Some(t) => TopicSet {
                slice_index,
                ..t.clone()
            },
            None => TopicSet::empty(&self.name, slice_index, 0),
        }
    }
}

/// splitmix64 finalizer.
pub(crate) fn mix(seed: u64, salt: u64) -> u64 {
    let mut z = seed ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub(crate) fn fnv1a(s: &str) -> u64 {
    s.bytes()
        .fold(0xcbf2_9ce4_8422_2325, |h, b| (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3))
}

impl Backend for NativeLda {
    fn name(&self) -> &str {
        &self.name
    }

    fn cumulative(&self) -> bool {
        false
    }

    fn fit(&mut self, request: &FitRequest) -> Result<FitResponse, BackendError> {
        let docs: Vec<Vec<String>> = request.documents.iter().map(|d| self.tokens(&d.text)).collect();
        self.vocab
            .extend(&docs, self.config.vocab)
            .map_err(|e| BackendError::Model(e.to_string()))?;

        let has_tokens = docs.iter().any(|d| !self.vocab.encode(d).is_empty());
        if !has_tokens {
            let mut topics = self.carry_over(request.slice_index);
            topics.top_n = request.top_n;
            return Ok(FitResponse {
                topics,
                doc_topics: Some(Vec::new()),
                fit_time_ms: 0.0,
                reported_fit_time_ms: None,
            });
        }

        let prior = self.state.as_ref().map(|s| s.chain_update(self.config.decay));
        let (state, assignment) = lda::gibbs_fit(
            &docs,
            &self.vocab,
            prior.as_ref(),
            &self.config.params(),
            self.config.iters,
            mix(self.seed, request.slice_index as u64),
        )
        .map_err(|e| BackendError::Model(e.to_string()))?;

        let topics = lda::extract_topics(&state, &self.vocab, request.top_n, request.slice_index, &self.name);
        let doc_topics = request
            .documents
            .iter()
            .zip(lda::assign_documents(&state, &assignment))
            .zip(&assignment.tokens)
            .filter(|(_, tokens)| !tokens.is_empty())
            .map(|((doc, (topic_id, score)), _)| DocTopic {
                doc_id: doc.id.clone(),
                topic_id,
                score,
            })
            .collect();
        self.state = Some(state);
        self.last_topics = Some(topics.clone());
        Ok(FitResponse {
            topics,
            doc_topics: Some(doc_topics),
            fit_time_ms: 0.0,
            reported_fit_time_ms: None,
        })
    }

    /// Folds the month's documents into the current model (topic-word counts
    /// frozen) and describes each topic that is dominant for at least one of
    /// them by the words those documents contributed to it. Words are ranked
    /// by month-local count, then by the topic's global count, then
    /// lexicographically, so every topic lists `top_n` words.
    fn attribute(&mut self, docs: &[RequestDoc], slice_index: usize, top_n: usize) -> Result<Option<TopicSet>, BackendError> {
        let Some(state) = &self.state else {
            return Ok(Some(TopicSet::empty(&self.name, slice_index, top_n)));
        };
        let v = self.vocab.len();
        let k_count = state.topics;
        let mut local = vec![vec![0.0f64; v]; k_count];
        let mut dominant = BTreeSet::new();
        for doc in docs {
            let ids = self.vocab.encode(&self.tokens(&doc.text));
            if ids.is_empty() {
                continue;
            }
            let seed = mix(self.seed, fnv1a(&doc.id));
            let (z, counts) = lda::infer_document(state, &ids, self.config.infer_iters, seed);
            for (&w, &k) in ids.iter().zip(&z) {
                local[k][w] += 1.0;
            }
            dominant.insert(lda::dominant_topic(&counts, state.alpha).0 as usize);
        }
        let n = top_n.min(v);
        let topics = dominant
            .into_iter()
            .map(|k| {
                let total: f64 = local[k].iter().sum();
                let mut ranked: Vec<usize> = (0..v).collect();
                ranked.sort_by(|&a, &b| {
                    local[k][b]
                        .total_cmp(&local[k][a])
                        .then(state.count(k, b).total_cmp(&state.count(k, a)))
                        .then_with(|| self.vocab.term(a).cmp(self.vocab.term(b)))
                });
                let words = ranked
                    .into_iter()
                    .take(n)
                    .map(|w| (self.vocab.term(w).to_string(), local[k][w] / total))
                    .collect();
                Topic { id: k as u32, words }
            })
            .collect();
        Ok(Some(TopicSet::new(&self.name, slice_index, top_n, topics)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn docs(texts: &[&str]) -> Vec<RequestDoc> {
        texts
            .iter()
            .enumerate()
            .map(|(i, t)| RequestDoc {
                id: format!("d{i}"),
                text: t.to_string(),
            })
            .collect()
    }

    fn backend(topics: usize) -> NativeLda {
        let config = NativeLdaConfig {
            topics,
            iters: 50,
            vocab: VocabFilter { min_df: 1, max_df_ratio: 1.0 },
            ..Default::default()
        };
        NativeLda::new("lda", config, HashSet::new(), TokenizeOptions::default(), 5).unwrap()
    }

    fn request(i: usize, documents: Vec<RequestDoc>) -> FitRequest {
        FitRequest {
            slice_index: i,
            slice_label: format!("s{i}"),
            documents,
            top_n: 3,
            cumulative: false,
            first_slice: i == 1,
        }
    }

    #[test]
    fn empty_slice_repeats_previous_topics() {
        let mut b = backend(2);
        let first = b.fit(&request(1, docs(&["mask lockdown", "vaccine booster", "mask lockdown"]))).unwrap();
        let empty = b.fit(&request(2, vec![])).unwrap();
        assert_eq!(empty.topics.slice_index, 2);
        assert_eq!(empty.topics.topics, first.topics.topics);

        let mut fresh = backend(2);
        let r = fresh.fit(&request(1, vec![])).unwrap();
        assert!(r.topics.is_empty());
    }

    #[test]
    fn attribution_uses_month_words() {
        let mut b = backend(2);
        let month_a = docs(&["aa bb cc", "aa bb cc aa", "bb cc aa"]);
        let month_b: Vec<RequestDoc> = docs(&["xx yy zz", "yy zz xx xx", "zz xx yy"])
            .into_iter()
            .map(|d| RequestDoc { id: format!("b{}", d.id), ..d })
            .collect();
        let mut all = month_a.clone();
        all.extend(month_b.clone());
        b.fit(&request(1, all)).unwrap();
        let a = b.attribute(&month_a, 1, 3).unwrap().unwrap();
        let words: BTreeSet<&str> = a.topics.iter().flat_map(|t| t.terms()).collect();
        assert_eq!(words, ["aa", "bb", "cc"].into_iter().collect());
        let none = b.attribute(&[], 1, 3).unwrap().unwrap();
        assert!(none.is_empty());
    }

    #[test]
    fn mix_spreads_seeds() {
        assert_ne!(mix(1, 1), mix(1, 2));
        assert_eq!(fnv1a("abc"), fnv1a("abc"));
    }
}
