//! Fixtures shared by the benchmarks.

use topicbench::synthgen::{self, SynthSpec};
use topicbench::vectorize::{build_vocabulary, VocabFilter};
use topicbench::Vocabulary;

/// Tokenized documents of a synthetic corpus with `slices` slices of
/// `docs_per_slice` documents each.
pub fn synthetic_docs(slices: usize, docs_per_slice: usize, seed: u64) -> Vec<Vec<String>> {
    let spec = SynthSpec {
        slices,
        docs_per_slice,
        vocab_size: 300,
        topics: 10,
        seed,
        ..Default::default()
    };
    synthgen::generate(&spec)
        .expect("valid spec")
        .documents()
        .into_iter()
        .map(|d| d.text.split_whitespace().map(String::from).collect())
        .collect()
}

pub fn vocabulary(docs: &[Vec<String>]) -> Vocabulary {
    let filter = VocabFilter {
        min_df: 1,
        ..Default::default()
    };
    build_vocabulary(docs, filter).expect("valid filter")
}
