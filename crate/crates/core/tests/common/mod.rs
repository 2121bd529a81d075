#![allow(dead_code)]

pub mod oracle;

use std::collections::BTreeMap;
use std::io::{BufReader, PipeWriter};
use std::thread::{self, JoinHandle};
use std::time::Duration;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use topicbench::backend::protocol;
use topicbench::backend::{BackendDescriptor, DocTopic, ProtocolBackend, RequestDoc};
use topicbench::runner::CorpusSource;
use topicbench::synthgen::SynthSpec;
use topicbench::{Backend, BackendError, ExperimentConfig, FitRequest, FitResponse, Topic, TopicSet};

pub fn words(text: &str) -> Vec<String> {
    text.split_whitespace().map(String::from).collect()
}

/// A small random corpus over a vocabulary of `v` words (`t0`, `t1`, ...):
/// uneven lengths including empty documents, skewed word frequencies.
pub fn random_corpus(rng: &mut ChaCha8Rng, n_docs: usize, v: usize) -> Vec<Vec<String>> {
    (0..n_docs)
        .map(|_| {
            let len = if rng.random_bool(0.1) { 0 } else { rng.random_range(1..=14) };
            (0..len)
                .map(|_| {
                    let a = rng.random_range(0..v);
                    let b = rng.random_range(0..v);
                    format!("t{}", a.min(b))
                })
                .collect()
        })
        .collect()
}

/// Random topics drawn from `t0..t{v+extra}`; the extra words never occur
/// in a corpus from [`random_corpus`] with the same `v`.
pub fn random_topics(rng: &mut ChaCha8Rng, n_topics: usize, max_len: usize, v: usize, extra: usize) -> Vec<Vec<String>> {
    let pool: Vec<String> = (0..v + extra).map(|i| format!("t{i}")).collect();
    (0..n_topics)
        .map(|_| {
            let len = rng.random_range(1..=max_len);
            pool.choose_multiple(rng, len).cloned().collect()
        })
        .collect()
}

pub fn topic_set(topics: &[Vec<String>]) -> TopicSet {
    let top_n = topics.iter().map(Vec::len).max().unwrap_or(1);
    TopicSet::new(
        "oracle",
        1,
        top_n,
        topics.iter().enumerate().map(|(i, w)| Topic::from_words(i as u32, w)).collect(),
    )
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Answers every fit after sleeping, with one fixed topic holding every document.
pub struct SleepyBackend {
    pub delay: Duration,
}

impl Backend for SleepyBackend {
    fn name(&self) -> &str {
        "sleepy"
    }

    fn cumulative(&self) -> bool {
        false
    }

    fn fit(&mut self, request: &FitRequest) -> Result<FitResponse, BackendError> {
        thread::sleep(self.delay);
        let topic = Topic::from_words(0, &["alpha", "beta", "gamma"]);
        Ok(FitResponse {
            topics: TopicSet::new("sleepy", request.slice_index, request.top_n, vec![topic]),
            doc_topics: Some(
                request
                    .documents
                    .iter()
                    .map(|d| DocTopic {
                        doc_id: d.id.clone(),
                        topic_id: 0,
                        score: 1.0,
                    })
                    .collect(),
            ),
            fit_time_ms: 0.0,
            reported_fit_time_ms: None,
        })
    }
}

/// Deterministic cumulative backend: one topic per distinct first word of
/// the documents it receives, topic words being the most frequent words of
/// those documents. Reports a fixed fit time of 12 ms.
pub struct FirstWordBackend {
    pub name: String,
    pub fail_at: Option<usize>,
}

impl FirstWordBackend {
    pub fn new(name: &str) -> Self {
        FirstWordBackend {
            name: name.to_string(),
            fail_at: None,
        }
    }
}

impl Backend for FirstWordBackend {
    fn name(&self) -> &str {
        &self.name
    }

    fn cumulative(&self) -> bool {
        true
    }

    fn fit(&mut self, request: &FitRequest) -> Result<FitResponse, BackendError> {
        if self.fail_at == Some(request.slice_index) {
            return Err(BackendError::Model(format!("refusing slice {}", request.slice_index)));
        }
        let mut groups: BTreeMap<String, Vec<&RequestDoc>> = BTreeMap::new();
        for d in &request.documents {
            if let Some(first) = d.text.split_whitespace().next() {
                groups.entry(first.to_string()).or_default().push(d);
            }
        }
        let mut topics = Vec::new();
        let mut doc_topics = Vec::new();
        for (id, (_, docs)) in groups.iter().enumerate() {
            let mut freq: BTreeMap<&str, f64> = BTreeMap::new();
            for d in docs {
                for w in d.text.split_whitespace() {
                    *freq.entry(w).or_insert(0.0) += 1.0;
                }
                doc_topics.push(DocTopic {
                    doc_id: d.id.clone(),
                    topic_id: id as u32,
                    score: 1.0,
                });
            }
            let mut t = Topic::new(id as u32, freq.into_iter().map(|(w, c)| (w.to_string(), c)).collect());
            t.words.truncate(request.top_n);
            topics.push(t);
        }
        Ok(FitResponse {
            topics: TopicSet::new(&self.name, request.slice_index, request.top_n, topics),
            doc_topics: Some(doc_topics),
            fit_time_ms: 0.0,
            reported_fit_time_ms: Some(12.0),
        })
    }
}

/// Runs `serve` on a thread connected to a client session through OS pipes.
pub fn connect_in_process<F>(
    descriptor: &BackendDescriptor,
    timeout: Duration,
    make: F,
) -> (ProtocolBackend<PipeWriter>, JoinHandle<Result<(), BackendError>>)
where
    F: FnOnce(&BTreeMap<String, String>) -> Result<Box<dyn Backend>, String> + Send + 'static,
{
    let (to_server_r, to_server_w) = std::io::pipe().expect("pipe");
    let (to_client_r, to_client_w) = std::io::pipe().expect("pipe");
    let server = thread::spawn(move || protocol::serve(BufReader::new(to_server_r), to_client_w, make));
    let client =
        ProtocolBackend::connect(BufReader::new(to_client_r), to_server_w, descriptor, timeout).expect("handshake");
    (client, server)
}

pub fn synth_config(spec: SynthSpec) -> ExperimentConfig {
    let mut c = ExperimentConfig {
        seed: spec.seed,
        corpus: CorpusSource {
            synth: Some(spec),
            ..Default::default()
        },
        ..Default::default()
    };
    c.native.topics = 3;
    c.native.iters = 200;
    c
}
