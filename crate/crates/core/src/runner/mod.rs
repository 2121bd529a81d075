//! The incremental experiment: feed slices to a backend one at a time, track
//! which topics each month carries after every increment, score everything.

mod config;
mod report;

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::time::{Duration, Instant};

use log::{info, warn};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backend::{
    fit_slice, Backend, BackendError, BackendKind, ExternalBackend, FitRequest, FitResponse, NativeLda, RequestDoc,
};
use crate::corpus::{self, CorpusError, Document, TimeSlice};
use crate::metrics::{
    self, build_stats, coherence_cv, coherence_npmi, coherence_umass, CountMode, EvolutionRecord, MetricError,
    MetricRecord, StabilityMatrix,
};
use crate::synthgen::{self, SynthError};
use crate::topics::TopicSet;
use crate::vectorize::tokenize;

pub use config::{CoherenceScope, CorpusSource, ExperimentConfig, MetricsConfig, TextConfig};
pub use report::{
    emit_reports, read_metrics_csv, read_stability_csv, summarize, write_evolution_csv, write_metrics_csv,
    write_stability_csv, RunSummary, REPORT_FILES,
};

#[derive(Debug, Error)]
pub enum RunError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Synth(#[from] SynthError),
    #[error("backend failed at increment {increment}: {source}")]
    Backend {
        increment: usize,
        #[source]
        source: BackendError,
    },
    #[error("backend could not be started: {0}")]
    BackendStart(#[source] BackendError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error("cannot write {path}: {source}")]
    Write {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl RunError {
    pub fn is_timeout(&self) -> bool {
        match self {
            RunError::Backend { source, .. } | RunError::BackendStart(source) => source.is_timeout(),
            _ => false,
        }
    }
}

/// A run that stopped early, with everything recorded before the failure.
#[derive(Debug, Error)]
#[error("{error}")]
pub struct RunAborted {
    pub error: RunError,
    pub ledger: RunLedger,
}

/// Topic sets attributed to one month after each increment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonthTrack {
    pub index: usize,
    pub label: String,
    /// Increment index → topics the model gave the month after that increment.
    pub snapshots: BTreeMap<usize, TopicSet>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunLedger {
    pub backend: String,
    pub config_hash: String,
    pub metrics: Vec<MetricRecord>,
    /// The topic set returned by each increment's fit.
    pub increments: Vec<TopicSet>,
    pub months: Vec<MonthTrack>,
    pub evolution: Vec<EvolutionRecord>,
    pub stability: Option<StabilityMatrix>,
    /// Time reported by the backend itself, where it reports one.
    pub reported_fit_time_ms: Vec<Option<f64>>,
    /// Wall-clock per increment including attribution and scoring.
    pub increment_wall_ms: Vec<f64>,
    pub complete: bool,
}

impl RunLedger {
    fn new(backend: &str, config_hash: String) -> Self {
        RunLedger {
            backend: backend.to_string(),
            config_hash,
            metrics: Vec::new(),
            increments: Vec::new(),
            months: Vec::new(),
            evolution: Vec::new(),
            stability: None,
            reported_fit_time_ms: Vec::new(),
            increment_wall_ms: Vec::new(),
            complete: false,
        }
    }

    /// The topics attributed to every month after the last recorded increment.
    pub fn final_month_topics(&self) -> Vec<(String, TopicSet)> {
        self.months
            .iter()
            .filter_map(|m| m.snapshots.values().next_back().map(|t| (m.label.clone(), t.clone())))
            .collect()
    }

    /// Every month has a snapshot for each processed increment from its own
    /// onward, subject to the evolution horizon.
    pub fn snapshots_monotone(&self, horizon: Option<usize>) -> bool {
        let last = self.metrics.len();
        self.months.iter().all(|m| {
            (m.index..=last).all(|j| {
                let required = j == m.index || j == last || horizon.is_none_or(|h| j - m.index <= h);
                !required || m.snapshots.contains_key(&j)
            })
        })
    }
}

fn request_doc(d: &Document) -> RequestDoc {
    RequestDoc {
        id: d.id.clone(),
        text: d.text.clone(),
    }
}

/// Loads, prepares and slices the configured corpus.
pub fn load_slices(config: &ExperimentConfig) -> Result<Vec<TimeSlice>, RunError> {
    let docs = match (&config.corpus.path, &config.corpus.synth) {
        (Some(path), None) => {
            let ingested = corpus::ingest(path, config.corpus.input_format(), &config.corpus.fields)?;
            if ingested.skipped > 0 {
                warn!("skipped {} invalid rows in {}", ingested.skipped, path.display());
            }
            ingested.documents
        }
        (None, Some(spec)) => synthgen::generate(spec)?.documents(),
        _ => return Err(RunError::Config("corpus: exactly one of `path` or `synth` is required".into())),
    };
    let docs = corpus::prepare(docs, &config.prepare, config.granularity, config.seed);
    Ok(corpus::slice_corpus(&docs, config.granularity)?)
}

/// Instantiates the configured backend.
pub fn build_backend(config: &ExperimentConfig) -> Result<Box<dyn Backend>, RunError> {
    let d = &config.backend;
    match d.kind {
        BackendKind::NativeLda => {
            if !d.params.is_empty() {
                warn!("native backend ignores [backend.params]; use [native]");
            }
            let b = NativeLda::new(
                d.name.clone(),
                config.native.clone(),
                config.text.stopwords()?,
                config.text.tokenize.clone(),
                config.seed,
            )
            .map_err(RunError::BackendStart)?;
            Ok(Box::new(b))
        }
        BackendKind::External => {
            let b = ExternalBackend::spawn(d, Duration::from_secs(config.timeout_secs)).map_err(RunError::BackendStart)?;
            Ok(Box::new(b))
        }
    }
}

/// Loads the corpus, starts the backend and runs every increment.
pub fn run_experiment(config: &ExperimentConfig) -> Result<RunLedger, Box<RunAborted>> {
    let early = |error: RunError| {
        Box::new(RunAborted {
            error,
            ledger: RunLedger::new(&config.backend.name, config.hash().unwrap_or_default()),
        })
    };
    config.validate().map_err(early)?;
    let slices = load_slices(config).map_err(early)?;
    let mut backend = build_backend(config).map_err(early)?;
    let result = run_slices(config, &slices, backend.as_mut());
    if let Err(e) = backend.shutdown() {
        warn!("backend shutdown: {e}");
    }
    result
}

struct Scoring<'a> {
    config: &'a ExperimentConfig,
    stopwords: HashSet<String>,
}

impl Scoring<'_> {
    fn tokens(&self, d: &Document) -> Vec<String> {
        tokenize(&d.text, &self.stopwords, &self.config.text.tokenize)
    }

    fn record(&self, slice: &TimeSlice, n_docs: usize, reference: &[Vec<String>], resp: &FitResponse) -> MetricRecord {
        let topics = &resp.topics;
        let words: HashSet<String> = topics.topics.iter().flat_map(|t| t.terms().map(String::from)).collect();
        let doc_stats = build_stats(reference, Some(&words), CountMode::Document).ok();
        let win_stats = build_stats(reference, Some(&words), CountMode::Window(self.config.metrics.cv_window)).ok();
        let value = |c: Option<metrics::Coherence>| c.map(|c| c.value);
        MetricRecord {
            slice_index: slice.index,
            label: slice.label.clone(),
            n_docs,
            n_topics: topics.len(),
            density: metrics::density(topics.len(), n_docs),
            diversity: metrics::diversity(topics),
            coherence_umass: doc_stats.as_ref().and_then(|s| value(coherence_umass(topics, s))),
            coherence_npmi: doc_stats.as_ref().and_then(|s| value(coherence_npmi(topics, s))),
            coherence_cv: win_stats.as_ref().and_then(|s| value(coherence_cv(topics, s))),
            fit_time_ms: resp.fit_time_ms,
        }
    }
}

/// Topics of `current` that the backend assigned at least one of `docs` to.
fn attribute_by_assignment(current: &TopicSet, docs: &[Document], assigned: &HashMap<String, u32>, month: usize) -> TopicSet {
    let ids: BTreeSet<u32> = docs.iter().filter_map(|d| assigned.get(&d.id).copied()).collect();
    TopicSet {
        slice_index: month,
        topics: current.topics.iter().filter(|t| ids.contains(&t.id)).cloned().collect(),
        ..current.clone()
    }
}

/// Runs all increments against an already started backend.
pub fn run_slices(
    config: &ExperimentConfig,
    slices: &[TimeSlice],
    backend: &mut dyn Backend,
) -> Result<RunLedger, Box<RunAborted>> {
    let hash = config.hash().unwrap_or_default();
    let mut ledger = RunLedger::new(backend.name(), hash);
    match run_into(config, slices, backend, &mut ledger) {
        Ok(()) => {
            ledger.complete = true;
            Ok(ledger)
        }
        Err(error) => Err(Box::new(RunAborted { error, ledger })),
    }
}

fn run_into(
    config: &ExperimentConfig,
    slices: &[TimeSlice],
    backend: &mut dyn Backend,
    ledger: &mut RunLedger,
) -> Result<(), RunError> {
    let scoring = Scoring {
        config,
        stopwords: config.text.stopwords()?,
    };
    let timeout = Duration::from_secs(config.timeout_secs);
    let horizon = config.metrics.evolution_horizon;
    let cumulative = backend.cumulative();

    let mut months: Vec<TimeSlice> = slices.to_vec();
    for m in &mut months {
        m.documents.sort_by(|a, b| (a.timestamp, &a.id).cmp(&(b.timestamp, &b.id)));
    }
    let mut seen: Vec<Document> = Vec::new();
    let mut seen_tokens: Vec<Vec<String>> = Vec::new();
    let mut assigned: HashMap<String, u32> = HashMap::new();
    let mut warned_unattributable = false;
    let last = months.len();

    for (pos, slice) in months.iter().enumerate() {
        let step = pos + 1;
        let started = Instant::now();
        seen.extend(slice.documents.iter().cloned());
        let slice_tokens: Vec<Vec<String>> = slice.documents.iter().map(|d| scoring.tokens(d)).collect();
        seen_tokens.extend(slice_tokens.iter().cloned());

        let request = FitRequest {
            slice_index: slice.index,
            slice_label: slice.label.clone(),
            documents: if cumulative { &seen[..] } else { &slice.documents[..] }
                .iter()
                .map(request_doc)
                .collect(),
            top_n: config.top_n,
            cumulative,
            first_slice: step == 1,
        };
        let backend_err = |source| RunError::Backend { increment: slice.index, source };
        let response = fit_slice(backend, &request).map_err(backend_err)?;
        if response.fit_time_ms > timeout.as_secs_f64() * 1000.0 {
            return Err(backend_err(BackendError::Timeout(timeout)));
        }
        info!(
            "increment {} ({}): {} topics in {:.1} ms",
            slice.index,
            slice.label,
            response.topics.len(),
            response.fit_time_ms
        );
        if let Some(dt) = &response.doc_topics {
            for d in dt {
                assigned.insert(d.doc_id.clone(), d.topic_id);
            }
        }

        ledger.months.push(MonthTrack {
            index: step,
            label: slice.label.clone(),
            snapshots: BTreeMap::new(),
        });
        for (h, month) in months[..step].iter().enumerate() {
            let h_step = h + 1;
            let needed = h_step == step || step == last || horizon.is_none_or(|x| step - h_step <= x);
            if !needed {
                continue;
            }
            let docs: Vec<RequestDoc> = month.documents.iter().map(request_doc).collect();
            let topics = match backend.attribute(&docs, month.index, config.top_n).map_err(backend_err)? {
                Some(t) => t,
                None => {
                    if response.doc_topics.is_none() && !warned_unattributable {
                        warn!("backend {} reports no document topics; months get no topics", backend.name());
                        warned_unattributable = true;
                    }
                    attribute_by_assignment(&response.topics, &month.documents, &assigned, month.index)
                }
            };
            ledger.months[h].snapshots.insert(step, topics);
        }

        for track in &ledger.months[..pos] {
            let (Some(past), Some(current)) = (track.snapshots.get(&(step - 1)), track.snapshots.get(&step)) else {
                continue;
            };
            if let Ok(tts) = metrics::evolution(past, current) {
                ledger.evolution.push(EvolutionRecord {
                    month_label: track.label.clone(),
                    increment_index: step,
                    past_count: past.len(),
                    current_count: current.len(),
                    tts,
                });
            }
        }

        let reference = match config.metrics.coherence_scope {
            CoherenceScope::Cumulative => &seen_tokens[..],
            CoherenceScope::Slice => &slice_tokens[..],
        };
        ledger.metrics.push(scoring.record(slice, seen.len(), reference, &response));
        ledger.reported_fit_time_ms.push(response.reported_fit_time_ms);
        ledger.increments.push(response.topics);
        ledger.increment_wall_ms.push(started.elapsed().as_secs_f64() * 1000.0);
    }

    ledger.stability = Some(metrics::stability(&ledger.final_month_topics(), config.metrics.match_threshold));
    Ok(())
}
