//! Incremental evaluation harness for dynamic topic models.
//!
//! Corpora are cleaned and bucketed into time slices, fed one increment at a
//! time to a topic-model [`backend`], and every increment is scored with the
//! measures in [`metrics`]: topic density, coherence (UMass, NPMI, C_v),
//! diversity, topic evolution between increments and the end-of-run topic
//! stability matrix. A native chained LDA sampler lives in [`lda`]; other
//! models join through the newline-delimited JSON protocol in
//! [`backend::protocol`].

pub mod backend;
pub mod corpus;
pub mod lda;
pub mod metrics;
pub mod runner;
pub mod synthgen;
pub mod topics;
pub mod vectorize;

pub use backend::{Backend, BackendDescriptor, BackendError, BackendKind, FitRequest, FitResponse};
pub use corpus::{Document, Granularity, TimeSlice};
pub use lda::{LdaParams, LdaState, SliceAssignment};
pub use metrics::{CooccurrenceStats, CountMode, EvolutionRecord, MetricRecord, StabilityMatrix};
pub use runner::{ExperimentConfig, RunLedger};
pub use topics::{Topic, TopicSet};
pub use vectorize::{DocTermMatrix, Vocabulary};
