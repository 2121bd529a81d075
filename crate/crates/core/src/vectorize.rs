//! Tokenization, vocabulary construction and sparse term-document matrices.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::io::{self, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum VectorizeError {
    #[error("vocabulary is empty after filtering")]
    EmptyVocabulary,
    #[error("invalid vocabulary filter: {0}")]
    InvalidFilter(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TokenizeOptions {
    pub min_token_len: usize,
    /// Append `a_b` tokens for adjacent retained unigrams.
    pub bigrams: bool,
}

impl Default for TokenizeOptions {
    fn default() -> Self {
        TokenizeOptions {
            min_token_len: 2,
            bigrams: false,
        }
    }
}

/// Splits cleaned text on whitespace, dropping stopwords and short tokens.
pub fn tokenize(text: &str, stopwords: &HashSet<String>, options: &TokenizeOptions) -> Vec<String> {
    let mut tokens: Vec<String> = text
        .split_whitespace()
        .filter(|t| t.chars().count() >= options.min_token_len && !stopwords.contains(*t))
        .map(str::to_string)
        .collect();
    if options.bigrams && tokens.len() > 1 {
        let pairs: Vec<String> = tokens.windows(2).map(|w| format!("{}_{}", w[0], w[1])).collect();
        tokens.extend(pairs);
    }
    tokens
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VocabFilter {
    pub min_df: usize,
    pub max_df_ratio: f64,
}

impl Default for VocabFilter {
    fn default() -> Self {
        VocabFilter {
            min_df: 2,
            max_df_ratio: 1.0,
        }
    }
}

impl VocabFilter {
    pub fn validate(&self) -> Result<(), VectorizeError> {
        if self.min_df < 1 {
            return Err(VectorizeError::InvalidFilter("min_df must be at least 1".into()));
        }
        if !(self.max_df_ratio > 0.0 && self.max_df_ratio <= 1.0) {
            return Err(VectorizeError::InvalidFilter("max_df_ratio must be in (0, 1]".into()));
        }
        Ok(())
    }

    fn keeps(&self, df: usize, n_docs: usize) -> bool {
        df >= self.min_df && df as f64 <= self.max_df_ratio * n_docs as f64
    }
}

/// Term list with stable ids and document frequencies over the fitted documents.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Vocabulary {
    terms: Vec<String>,
    index: HashMap<String, usize>,
    doc_freq: Vec<usize>,
    n_docs: usize,
    // document frequency of every token seen, retained or not
    seen_df: HashMap<String, usize>,
}

fn count_df(docs: &[Vec<String>], into: &mut HashMap<String, usize>) {
    for doc in docs {
        let unique: HashSet<&String> = doc.iter().collect();
        for t in unique {
            *into.entry(t.clone()).or_insert(0) += 1;
        }
    }
}

/// Fits a vocabulary. Terms are sorted lexicographically.
pub fn build_vocabulary(docs: &[Vec<String>], filter: VocabFilter) -> Result<Vocabulary, VectorizeError> {
    filter.validate()?;
    let mut vocab = Vocabulary::default();
    vocab.extend(docs, filter)?;
    if vocab.is_empty() {
        return Err(VectorizeError::EmptyVocabulary);
    }
    Ok(vocab)
}

impl Vocabulary {
    /// Folds in another batch of documents. Existing term ids never change;
    /// tokens that now pass the filter are appended in lexicographic order.
    /// Returns the number of terms added.
    pub fn extend(&mut self, docs: &[Vec<String>], filter: VocabFilter) -> Result<usize, VectorizeError> {
        filter.validate()?;
        count_df(docs, &mut self.seen_df);
        self.n_docs += docs.len();
        for (id, term) in self.terms.iter().enumerate() {
            self.doc_freq[id] = self.seen_df[term];
        }
        let mut fresh: Vec<(&String, usize)> = self
            .seen_df
            .iter()
            .filter(|(t, &df)| !self.index.contains_key(*t) && filter.keeps(df, self.n_docs))
            .map(|(t, &df)| (t, df))
            .collect();
        fresh.sort();
        let fresh: Vec<(String, usize)> = fresh.into_iter().map(|(t, df)| (t.clone(), df)).collect();
        let added = fresh.len();
        for (term, df) in fresh {
            self.index.insert(term.clone(), self.terms.len());
            self.terms.push(term);
            self.doc_freq.push(df);
        }
        Ok(added)
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn n_docs(&self) -> usize {
        self.n_docs
    }

    pub fn terms(&self) -> &[String] {
        &self.terms
    }

    pub fn term(&self, id: usize) -> &str {
        &self.terms[id]
    }

    pub fn id(&self, term: &str) -> Option<usize> {
        self.index.get(term).copied()
    }

    pub fn doc_freq(&self, id: usize) -> usize {
        self.doc_freq[id]
    }

    /// Maps tokens to ids, dropping out-of-vocabulary tokens.
    pub fn encode(&self, tokens: &[String]) -> Vec<usize> {
        tokens.iter().filter_map(|t| self.id(t)).collect()
    }

    /// Smoothed inverse document frequency `ln((1 + N) / (1 + df)) + 1`.
    pub fn idf(&self, id: usize) -> f64 {
        smoothed_idf(self.n_docs, self.doc_freq[id])
    }

    /// One `term<TAB>doc_freq` line per term, in id order.
    pub fn write_tsv<W: Write>(&self, mut w: W) -> io::Result<()> {
        for (t, df) in self.terms.iter().zip(&self.doc_freq) {
            writeln!(w, "{t}\t{df}")?;
        }
        Ok(())
    }
}

pub fn smoothed_idf(n_docs: usize, df: usize) -> f64 {
    ((1.0 + n_docs as f64) / (1.0 + df as f64)).ln() + 1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Weighting {
    Count,
    Tfidf,
}

/// Sparse matrix of `(doc, term, weight)` triples sorted by doc then term.
#[derive(Debug, Clone, PartialEq)]
pub struct DocTermMatrix {
    pub n_docs: usize,
    pub n_terms: usize,
    pub entries: Vec<(usize, usize, f64)>,
    pub weighting: Weighting,
}

impl DocTermMatrix {
    pub fn row_sum(&self, doc: usize) -> f64 {
        self.entries.iter().filter(|e| e.0 == doc).map(|e| e.2).sum()
    }

    /// Writes `doc,term,weight` CSV with a header row.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), csv::Error> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["doc", "term", "weight"])?;
        for (d, t, v) in &self.entries {
            out.write_record([d.to_string(), t.to_string(), v.to_string()])?;
        }
        out.flush()?;
        Ok(())
    }
}

fn term_counts(doc: &[String], vocab: &Vocabulary) -> BTreeMap<usize, usize> {
    let mut counts = BTreeMap::new();
    for id in vocab.encode(doc) {
        *counts.entry(id).or_insert(0) += 1;
    }
    counts
}

/// Raw term counts.
pub fn count_matrix(docs: &[Vec<String>], vocab: &Vocabulary) -> DocTermMatrix {
    let entries = docs
        .iter()
        .enumerate()
        .flat_map(|(d, doc)| {
            term_counts(doc, vocab)
                .into_iter()
                .map(move |(t, c)| (d, t, c as f64))
        })
        .collect();
    DocTermMatrix {
        n_docs: docs.len(),
        n_terms: vocab.len(),
        entries,
        weighting: Weighting::Count,
    }
}

/// `tf(d, t) * idf(t)` with the vocabulary's smoothed idf. Out-of-vocabulary
/// tokens are ignored; documents without known tokens become empty rows.
pub fn tfidf(docs: &[Vec<String>], vocab: &Vocabulary) -> DocTermMatrix {
    let mut m = count_matrix(docs, vocab);
    for e in &mut m.entries {
        e.2 *= vocab.idf(e.1);
    }
    m.weighting = Weighting::Tfidf;
    m
}
