//! Deterministic stand-in for an external topic model, speaking the line
//! protocol on stdin/stdout.
//!
//! Every document is assigned to a topic keyed by its first word; a topic's
//! words are the most frequent words of its documents. `hello` parameters:
//! `sleep_ms` delays each fit, `fail_at` answers that slice with an error,
//! `exit_at` terminates the process on receiving that slice.

use std::collections::BTreeMap;
use std::io::{self, BufReader};
use std::process::ExitCode;
use std::thread;
use std::time::Duration;

use topicbench::backend::protocol;
use topicbench::backend::{DocTopic, RequestDoc};
use topicbench::{Backend, BackendError, FitRequest, FitResponse, Topic, TopicSet};

struct Stub {
    sleep: Duration,
    fail_at: Option<usize>,
    exit_at: Option<usize>,
}

fn param<T: std::str::FromStr>(params: &BTreeMap<String, String>, key: &str) -> Result<Option<T>, String> {
    params
        .get(key)
        .map(|v| v.parse().map_err(|_| format!("bad value `{v}` for `{key}`")))
        .transpose()
}

impl Stub {
    fn from_params(params: &BTreeMap<String, String>) -> Result<Self, String> {
        if let Some(key) = params.keys().find(|k| !["sleep_ms", "fail_at", "exit_at"].contains(&k.as_str())) {
            return Err(format!("unknown parameter `{key}`"));
        }
        Ok(Stub {
            sleep: Duration::from_millis(param(params, "sleep_ms")?.unwrap_or(0)),
            fail_at: param(params, "fail_at")?,
            exit_at: param(params, "exit_at")?,
        })
    }
}

impl Backend for Stub {
    fn name(&self) -> &str {
        "stub"
    }

    fn cumulative(&self) -> bool {
        true
    }

    fn fit(&mut self, request: &FitRequest) -> Result<FitResponse, BackendError> {
        if self.exit_at == Some(request.slice_index) {
            std::process::exit(70);
        }
        thread::sleep(self.sleep);
        if self.fail_at == Some(request.slice_index) {
            return Err(BackendError::Model(format!("refusing slice {}", request.slice_index)));
        }
        let mut groups: BTreeMap<&str, Vec<&RequestDoc>> = BTreeMap::new();
        for d in &request.documents {
            if let Some(first) = d.text.split_whitespace().next() {
                groups.entry(first).or_default().push(d);
            }
        }
        let mut topics = Vec::new();
        let mut doc_topics = Vec::new();
        for (id, docs) in groups.values().enumerate() {
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
            topics: TopicSet::new("stub", request.slice_index, request.top_n, topics),
            doc_topics: Some(doc_topics),
            fit_time_ms: 0.0,
            reported_fit_time_ms: None,
        })
    }
}

fn main() -> ExitCode {
    let stdin = BufReader::new(io::stdin().lock());
    let stdout = io::stdout().lock();
    match protocol::serve(stdin, stdout, |params| {
        Stub::from_params(params).map(|s| Box::new(s) as Box<dyn Backend>)
    }) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("stub-backend: {e}");
            ExitCode::FAILURE
        }
    }
}
