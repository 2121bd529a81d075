use std::collections::HashSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::RunError;
use crate::backend::{BackendDescriptor, NativeLdaConfig};
use crate::corpus::{builtin_stopwords, load_stopwords, FieldMap, Granularity, InputFormat, PrepareConfig};
use crate::metrics::DEFAULT_CV_WINDOW;
use crate::synthgen::SynthSpec;
use crate::vectorize::TokenizeOptions;

/// Where documents come from: a CSV/JSONL file or the synthetic generator.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorpusSource {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub format: Option<InputFormat>,
    pub fields: FieldMap,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub synth: Option<SynthSpec>,
}

impl CorpusSource {
    /// Explicit format, otherwise inferred from the file extension.
    pub fn input_format(&self) -> InputFormat {
        self.format.unwrap_or_else(|| {
            match self.path.as_ref().and_then(|p| p.extension()).and_then(|e| e.to_str()) {
                Some("jsonl") | Some("json") | Some("ndjson") => InputFormat::Jsonl,
                _ => InputFormat::Csv,
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TextConfig {
    /// Bundled list (`german`, `english`).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stopwords_language: Option<String>,
    /// Additional stopword file, one word per line.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stopwords_file: Option<PathBuf>,
    pub tokenize: TokenizeOptions,
}

impl TextConfig {
    pub fn stopwords(&self) -> Result<HashSet<String>, RunError> {
        let mut words = HashSet::new();
        if let Some(lang) = &self.stopwords_language {
            words.extend(
                builtin_stopwords(lang).ok_or_else(|| RunError::Config(format!("no bundled stopwords for `{lang}`")))?,
            );
        }
        if let Some(path) = &self.stopwords_file {
            words.extend(load_stopwords(path)?);
        }
        Ok(words)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoherenceScope {
    /// Every document seen up to and including the increment.
    Cumulative,
    /// Only the increment's own slice.
    Slice,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricsConfig {
    /// Minimum word-set Jaccard for two topics to count as the same topic.
    pub match_threshold: f64,
    pub coherence_scope: CoherenceScope,
    pub cv_window: usize,
    /// Evolution is recorded for months at most this many increments back.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub evolution_horizon: Option<usize>,
    /// Adds an `inverted` (1 - tts) column to evolution.csv.
    pub inverted_evolution: bool,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        MetricsConfig {
            match_threshold: 0.5,
            coherence_scope: CoherenceScope::Cumulative,
            cv_window: DEFAULT_CV_WINDOW,
            evolution_horizon: None,
            inverted_evolution: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub top_n: usize,
    pub granularity: Granularity,
    /// Upper bound on a single increment's fit.
    pub timeout_secs: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,
    pub corpus: CorpusSource,
    pub prepare: PrepareConfig,
    pub text: TextConfig,
    pub backend: BackendDescriptor,
    pub native: NativeLdaConfig,
    pub metrics: MetricsConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            seed: 0,
            top_n: 10,
            granularity: Granularity::Month,
            timeout_secs: 3600,
            out_dir: None,
            corpus: CorpusSource::default(),
            prepare: PrepareConfig::default(),
            text: TextConfig::default(),
            backend: BackendDescriptor::native("native_lda"),
            native: NativeLdaConfig::default(),
            metrics: MetricsConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, RunError> {
        let config: ExperimentConfig = toml::from_str(text).map_err(|e| RunError::Config(e.to_string()))?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, RunError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| RunError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml(&self) -> Result<String, RunError> {
        toml::to_string(self).map_err(|e| RunError::Config(e.to_string()))
    }

    /// First 16 hex digits of the SHA-256 of the serialized config,
    /// ignoring the output directory.
    pub fn hash(&self) -> Result<String, RunError> {
        let mut c = self.clone();
        c.out_dir = None;
        let digest = Sha256::digest(c.to_toml()?.as_bytes());
        Ok(digest.iter().take(8).map(|b| format!("{b:02x}")).collect())
    }

    pub fn validate(&self) -> Result<(), RunError> {
        let bad = |m: String| Err(RunError::Config(m));
        if self.top_n == 0 {
            return bad("top_n must be positive".into());
        }
        if self.timeout_secs == 0 {
            return bad("timeout_secs must be positive".into());
        }
        match (&self.corpus.path, &self.corpus.synth) {
            (Some(_), Some(_)) => return bad("corpus: set either `path` or `synth`, not both".into()),
            (None, None) => return bad("corpus: one of `path` or `synth` is required".into()),
            (None, Some(spec)) => spec.validate().map_err(|e| RunError::Config(e.to_string()))?,
            (Some(_), None) => {}
        }
        if self.prepare.max_tokens == 0 {
            return bad("prepare.max_tokens must be positive".into());
        }
        if self.prepare.sample_per_bucket == Some(0) {
            return bad("prepare.sample_per_bucket must be positive".into());
        }
        if self.text.tokenize.min_token_len == 0 {
            return bad("text.tokenize.min_token_len must be positive".into());
        }
        self.backend.validate().map_err(|e| RunError::Config(e.to_string()))?;
        self.native.validate().map_err(|e| RunError::Config(format!("native: {e}")))?;
        let m = &self.metrics;
        if !(0.0..=1.0).contains(&m.match_threshold) {
            return bad(format!("metrics.match_threshold {} outside [0, 1]", m.match_threshold));
        }
        if m.cv_window < 2 {
            return bad(format!("metrics.cv_window must be at least 2, got {}", m.cv_window));
        }
        if m.evolution_horizon == Some(0) {
            return bad("metrics.evolution_horizon must be positive".into());
        }
        Ok(())
    }
}
