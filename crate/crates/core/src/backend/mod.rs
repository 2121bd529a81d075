//! Topic-model backends and the harness side of fitting one increment.
//!
//! Every backend answers [`FitRequest`]s through the [`Backend`] trait. The
//! native chained LDA lives in [`native`]; any other model runs as a child
//! process speaking the line protocol in [`protocol`] via [`external`].

pub mod external;
pub mod matching;
pub mod native;
pub mod protocol;

use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::topics::TopicSet;

pub use external::{ExternalBackend, ProtocolBackend};
pub use matching::{dedupe_topics, jaccard, match_topics, TopicMatch};
pub use native::{NativeLda, NativeLdaConfig};

#[derive(Debug, Error)]
pub enum BackendError {
    #[error("invalid backend descriptor: {0}")]
    Descriptor(String),
    #[error("failed to start backend `{command}`: {source}")]
    Spawn {
        command: String,
        #[source]
        source: std::io::Error,
    },
    #[error("backend io: {0}")]
    Io(#[from] std::io::Error),
    #[error("backend exited unexpectedly")]
    Exited,
    #[error("backend did not answer within {0:?}")]
    Timeout(Duration),
    #[error("malformed backend message: {0}")]
    Malformed(String),
    #[error("backend reported an error: {0}")]
    Remote(String),
    #[error("model failure: {0}")]
    Model(String),
}

impl BackendError {
    pub fn is_timeout(&self) -> bool {
        matches!(self, BackendError::Timeout(_))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    NativeLda,
    External,
}

/// Names a backend and its hyper-parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BackendDescriptor {
    pub name: String,
    pub kind: BackendKind,
    /// Executable and arguments; required for external backends.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub command: Option<Vec<String>>,
    #[serde(default)]
    pub params: BTreeMap<String, String>,
    /// Whether each increment carries all documents so far instead of only
    /// the new slice. Defaults to true for external backends.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cumulative: Option<bool>,
}

impl BackendDescriptor {
    pub fn native(name: impl Into<String>) -> Self {
        BackendDescriptor {
            name: name.into(),
            kind: BackendKind::NativeLda,
            command: None,
            params: BTreeMap::new(),
            cumulative: None,
        }
    }

    pub fn external(name: impl Into<String>, command: Vec<String>) -> Self {
        BackendDescriptor {
            name: name.into(),
            kind: BackendKind::External,
            command: Some(command),
            params: BTreeMap::new(),
            cumulative: None,
        }
    }

    /// Parses the CLI form: `native`, `native_lda`, or `external:<command line>`.
    pub fn parse_cli(spec: &str) -> Result<Self, BackendError> {
        if let Some(cmd) = spec.strip_prefix("external:") {
            let argv: Vec<String> = cmd.split_whitespace().map(String::from).collect();
            let name = argv
                .first()
                .and_then(|p| std::path::Path::new(p).file_stem())
                .map(|s| s.to_string_lossy().into_owned())
                .ok_or_else(|| BackendError::Descriptor("external backend needs a command".into()))?;
            let d = BackendDescriptor::external(name, argv);
            d.validate()?;
            return Ok(d);
        }
        match spec {
            "native" | "native_lda" | "lda" => Ok(BackendDescriptor::native("native_lda")),
            other => Err(BackendError::Descriptor(format!(
                "unknown backend `{other}` (use native or external:<command>)"
            ))),
        }
    }

    pub fn is_cumulative(&self) -> bool {
        self.cumulative.unwrap_or(self.kind == BackendKind::External)
    }

    pub fn validate(&self) -> Result<(), BackendError> {
        if self.name.is_empty() {
            return Err(BackendError::Descriptor("name must not be empty".into()));
        }
        if self.kind == BackendKind::External && self.command.as_ref().is_none_or(Vec::is_empty) {
            return Err(BackendError::Descriptor("external backend requires a command".into()));
        }
        if self.params.keys().any(String::is_empty) {
            return Err(BackendError::Descriptor("parameter names must not be empty".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RequestDoc {
    pub id: String,
    pub text: String,
}

/// One increment's worth of documents for a backend.
#[derive(Debug, Clone, PartialEq)]
pub struct FitRequest {
    pub slice_index: usize,
    pub slice_label: String,
    pub documents: Vec<RequestDoc>,
    pub top_n: usize,
    pub cumulative: bool,
    pub first_slice: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DocTopic {
    pub doc_id: String,
    pub topic_id: u32,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResponse {
    pub topics: TopicSet,
    pub doc_topics: Option<Vec<DocTopic>>,
    /// Wall-clock time measured by the harness around the fit.
    pub fit_time_ms: f64,
    /// Timing reported by the backend itself, when it reports one.
    pub reported_fit_time_ms: Option<f64>,
}

/// A topic model that can be trained one increment at a time.
pub trait Backend {
    fn name(&self) -> &str;

    /// Whether requests should carry all documents seen so far.
    fn cumulative(&self) -> bool;

    /// Fits the increment. Implementations may leave `fit_time_ms` at zero;
    /// [`fit_slice`] overwrites it with the harness measurement.
    fn fit(&mut self, request: &FitRequest) -> Result<FitResponse, BackendError>;

    /// Topics the current model gives to `docs` (documents of one month),
    /// with words representative of those documents. Backends returning
    /// `None` are attributed through the `doc_topics` of their responses.
    fn attribute(
        &mut self,
        _docs: &[RequestDoc],
        _slice_index: usize,
        _top_n: usize,
    ) -> Result<Option<TopicSet>, BackendError> {
        Ok(None)
    }

    fn shutdown(&mut self) -> Result<(), BackendError> {
        Ok(())
    }
}

/// Runs one fit and records its wall-clock time.
pub fn fit_slice(backend: &mut dyn Backend, request: &FitRequest) -> Result<FitResponse, BackendError> {
    let start = Instant::now();
    let mut response = backend.fit(request)?;
    response.fit_time_ms = start.elapsed().as_secs_f64() * 1000.0;
    if response.topics.slice_index != request.slice_index {
        return Err(BackendError::Malformed(format!(
            "response for slice {} answers request for slice {}",
            response.topics.slice_index, request.slice_index
        )));
    }
    response.topics.validate().map_err(BackendError::Malformed)?;
    Ok(response)
}
