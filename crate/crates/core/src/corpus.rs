//! Corpus ingestion, text cleaning, sentence splitting, sampling and time slicing.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use chrono::{Datelike, NaiveDate};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed csv input: {0}")]
    Csv(#[from] csv::Error),
    #[error("malformed json on line {line}: {source}")]
    Json {
        line: usize,
        #[source]
        source: serde_json::Error,
    },
    #[error("mapped column `{0}` not found in input")]
    MissingColumn(String),
    #[error("no valid rows in input ({skipped} skipped)")]
    NoValidRows { skipped: usize },
    #[error("document text is empty")]
    EmptyText,
    #[error("cannot parse timestamp `{0}`")]
    BadTimestamp(String),
    #[error("cannot slice an empty corpus")]
    EmptyCorpus,
    #[error("unknown granularity `{0}` (expected day, month, quarter or year)")]
    UnknownGranularity(String),
}

/// One timestamped text unit.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    pub timestamp: NaiveDate,
    pub text: String,
    pub location: Option<String>,
    pub source_id: Option<String>,
}

impl Document {
    pub fn new(
        id: impl Into<String>,
        timestamp: NaiveDate,
        text: impl Into<String>,
    ) -> Result<Self, CorpusError> {
        let text = text.into();
        if text.trim().is_empty() {
            return Err(CorpusError::EmptyText);
        }
        Ok(Document {
            id: id.into(),
            timestamp,
            text,
            location: None,
            source_id: None,
        })
    }

    pub fn with_location(mut self, location: impl Into<String>) -> Self {
        self.location = Some(location.into());
        self
    }
}

/// Parses a calendar date. Year-only input maps to January 1, month-only
/// input to the first of the month; a time-of-day suffix is ignored.
pub fn parse_timestamp(raw: &str) -> Result<NaiveDate, CorpusError> {
    let s = raw.trim();
    let bad = || CorpusError::BadTimestamp(raw.to_string());
    if let Ok(d) = NaiveDate::parse_from_str(s, "%Y-%m-%d") {
        return Ok(d);
    }
    // 2020-01-15T10:00:00Z, 2020-01-15 10:00:00
    if s.len() > 10 && s.is_char_boundary(10) && matches!(s.as_bytes()[10], b'T' | b' ') {
        return NaiveDate::parse_from_str(&s[..10], "%Y-%m-%d").map_err(|_| bad());
    }
    let parts: Vec<&str> = s.split('-').collect();
    let all_digits = |p: &str| !p.is_empty() && p.bytes().all(|b| b.is_ascii_digit());
    match parts.as_slice() {
        [y] if y.len() == 4 && all_digits(y) => {
            NaiveDate::from_ymd_opt(y.parse().map_err(|_| bad())?, 1, 1).ok_or_else(bad)
        }
        [y, m] if y.len() == 4 && all_digits(y) && all_digits(m) => NaiveDate::from_ymd_opt(
            y.parse().map_err(|_| bad())?,
            m.parse().map_err(|_| bad())?,
            1,
        )
        .ok_or_else(bad),
        _ => Err(bad()),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Granularity {
    Day,
    Month,
    Quarter,
    Year,
}

impl Granularity {
    /// Calendar bucket ordinal; consecutive buckets differ by one.
    pub fn bucket(self, date: NaiveDate) -> i64 {
        match self {
            Granularity::Day => date.num_days_from_ce() as i64,
            Granularity::Month => date.year() as i64 * 12 + date.month0() as i64,
            Granularity::Quarter => date.year() as i64 * 4 + (date.month0() / 3) as i64,
            Granularity::Year => date.year() as i64,
        }
    }

    pub fn label(self, bucket: i64) -> String {
        match self {
            Granularity::Day => NaiveDate::from_num_days_from_ce_opt(bucket as i32)
                .map(|d| d.format("%Y-%m-%d").to_string())
                .unwrap_or_default(),
            Granularity::Month => format!("{:04}-{:02}", bucket.div_euclid(12), bucket.rem_euclid(12) + 1),
            Granularity::Quarter => format!("{:04}-Q{}", bucket.div_euclid(4), bucket.rem_euclid(4) + 1),
            Granularity::Year => format!("{:04}", bucket),
        }
    }

    pub fn label_of(self, date: NaiveDate) -> String {
        self.label(self.bucket(date))
    }
}

impl FromStr for Granularity {
    type Err = CorpusError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "day" => Ok(Granularity::Day),
            "month" => Ok(Granularity::Month),
            "quarter" => Ok(Granularity::Quarter),
            "year" => Ok(Granularity::Year),
            _ => Err(CorpusError::UnknownGranularity(s.to_string())),
        }
    }
}

impl fmt::Display for Granularity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Granularity::Day => "day",
            Granularity::Month => "month",
            Granularity::Quarter => "quarter",
            Granularity::Year => "year",
        };
        f.write_str(s)
    }
}

/// Documents sharing one calendar bucket. `index` is 1-based.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSlice {
    pub index: usize,
    pub label: String,
    pub documents: Vec<Document>,
}

impl TimeSlice {
    pub fn len(&self) -> usize {
        self.documents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InputFormat {
    Csv,
    Jsonl,
}

impl FromStr for InputFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "csv" => Ok(InputFormat::Csv),
            "jsonl" => Ok(InputFormat::Jsonl),
            other => Err(format!("unknown input format `{other}`")),
        }
    }
}

/// Maps input columns (CSV header names or JSON keys) to document roles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldMap {
    pub id: String,
    pub timestamp: String,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub location: Option<String>,
}

impl Default for FieldMap {
    fn default() -> Self {
        FieldMap {
            id: "id".into(),
            timestamp: "timestamp".into(),
            text: "text".into(),
            location: Some("location".into()),
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct Ingested {
    pub documents: Vec<Document>,
    pub skipped: usize,
}

/// Reads a corpus file. Rows with empty text, a bad timestamp, an empty id or
/// an id seen before are skipped and counted.
pub fn ingest(path: &Path, format: InputFormat, fields: &FieldMap) -> Result<Ingested, CorpusError> {
    let io_err = |source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    };
    let file = File::open(path).map_err(io_err)?;
    let mut out = Ingested::default();
    let mut seen = HashSet::new();
    let mut push = |out: &mut Ingested, id: String, ts: &str, text: String, loc: Option<String>| {
        let Ok(timestamp) = parse_timestamp(ts) else {
            out.skipped += 1;
            return;
        };
        if id.is_empty() || text.trim().is_empty() || !seen.insert(id.clone()) {
            out.skipped += 1;
            return;
        }
        out.documents.push(Document {
            id,
            timestamp,
            text,
            location: loc.filter(|l| !l.is_empty()),
            source_id: None,
        });
    };

    match format {
        InputFormat::Csv => {
            let mut reader = csv::ReaderBuilder::new().flexible(true).from_reader(file);
            let headers = reader.headers()?.clone();
            let col = |name: &str| {
                headers
                    .iter()
                    .position(|h| h == name)
                    .ok_or_else(|| CorpusError::MissingColumn(name.to_string()))
            };
            let id_col = col(&fields.id)?;
            let ts_col = col(&fields.timestamp)?;
            let text_col = col(&fields.text)?;
            let loc_col = fields.location.as_deref().map(col).transpose()?;
            for record in reader.records() {
                let record = record?;
                let get = |i: usize| record.get(i).unwrap_or("").to_string();
                push(
                    &mut out,
                    get(id_col),
                    &get(ts_col),
                    get(text_col),
                    loc_col.map(get),
                );
            }
        }
        InputFormat::Jsonl => {
            let mut checked_columns = false;
            for (lineno, line) in BufReader::new(file).lines().enumerate() {
                let line = line.map_err(io_err)?;
                if line.trim().is_empty() {
                    continue;
                }
                let value: serde_json::Value = serde_json::from_str(&line)
                    .map_err(|source| CorpusError::Json { line: lineno + 1, source })?;
                let obj = value.as_object();
                if !checked_columns {
                    for key in [&fields.id, &fields.timestamp, &fields.text] {
                        if obj.is_none_or(|o| !o.contains_key(key.as_str())) {
                            return Err(CorpusError::MissingColumn(key.clone()));
                        }
                    }
                    checked_columns = true;
                }
                let get = |key: &str| -> Option<String> {
                    match obj?.get(key)? {
                        serde_json::Value::String(s) => Some(s.clone()),
                        serde_json::Value::Null => None,
                        other => Some(other.to_string()),
                    }
                };
                push(
                    &mut out,
                    get(&fields.id).unwrap_or_default(),
                    &get(&fields.timestamp).unwrap_or_default(),
                    get(&fields.text).unwrap_or_default(),
                    fields.location.as_deref().and_then(get),
                );
            }
        }
    }

    if out.documents.is_empty() {
        return Err(CorpusError::NoValidRows { skipped: out.skipped });
    }
    Ok(out)
}

/// Writes documents as canonical JSONL.
pub fn write_jsonl(docs: &[Document], path: &Path) -> std::io::Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for d in docs {
        serde_json::to_writer(&mut w, d)?;
        w.write_all(b"\n")?;
    }
    w.flush()
}

/// Reads a canonical JSONL dump written by [`write_jsonl`].
pub fn read_jsonl(path: &Path) -> Result<Vec<Document>, CorpusError> {
    let file = File::open(path).map_err(|source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let mut docs = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|source| CorpusError::Io {
            path: path.display().to_string(),
            source,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        docs.push(
            serde_json::from_str(&line).map_err(|source| CorpusError::Json { line: i + 1, source })?,
        );
    }
    Ok(docs)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CleaningConfig {
    pub strip_urls: bool,
    pub strip_mentions: bool,
    pub lowercase: bool,
    pub keep_digits: bool,
}

impl Default for CleaningConfig {
    fn default() -> Self {
        CleaningConfig {
            strip_urls: true,
            strip_mentions: true,
            lowercase: true,
            keep_digits: true,
        }
    }
}

fn is_url(token: &str) -> bool {
    let t = token.to_ascii_lowercase();
    t.starts_with("http://") || t.starts_with("https://") || t.starts_with("www.")
}

/// Normalizes tweet-style text: drops URLs and @-mentions, replaces every
/// character that is not a letter or digit with a space (this also removes
/// `#` and emoji), lowercases and collapses whitespace.
pub fn clean(text: &str, rules: &CleaningConfig) -> String {
    let lowered;
    let text = if rules.lowercase {
        lowered = text.to_lowercase();
        lowered.as_str()
    } else {
        text
    };
    let mut out = String::with_capacity(text.len());
    for token in text.split_whitespace() {
        if (rules.strip_urls && is_url(token)) || (rules.strip_mentions && token.starts_with('@')) {
            continue;
        }
        for c in token.chars() {
            let keep = c.is_alphabetic() || (rules.keep_digits && c.is_numeric());
            if keep {
                out.push(c);
            } else if !out.ends_with(' ') && !out.is_empty() {
                out.push(' ');
            }
        }
        if !out.ends_with(' ') && !out.is_empty() {
            out.push(' ');
        }
    }
    out.truncate(out.trim_end().len());
    out
}

/// Splits text into sentences at `.`, `!` or `?` followed by whitespace.
fn sentences(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut current = String::new();
    let mut chars = text.chars().peekable();
    while let Some(c) = chars.next() {
        current.push(c);
        if matches!(c, '.' | '!' | '?') && chars.peek().is_some_and(|n| n.is_whitespace()) {
            let s = current.trim();
            if !s.is_empty() {
                out.push(s.to_string());
            }
            current.clear();
        }
    }
    let s = current.trim();
    if !s.is_empty() {
        out.push(s.to_string());
    }
    out
}

/// Breaks a long document into sentence-level documents. Sentences (or
/// delimiter-free text) longer than `max_tokens` are cut into fixed-width
/// chunks. Children get ids `<id>#1`, `<id>#2`, ... and keep the timestamp.
pub fn split_sentences(doc: &Document, max_tokens: usize) -> Vec<Document> {
    let max_tokens = max_tokens.max(1);
    if doc.text.split_whitespace().count() <= max_tokens {
        return vec![doc.clone()];
    }
    let mut pieces = Vec::new();
    for sentence in sentences(&doc.text) {
        let tokens: Vec<&str> = sentence.split_whitespace().collect();
        if tokens.len() <= max_tokens {
            pieces.push(sentence);
        } else {
            pieces.extend(tokens.chunks(max_tokens).map(|c| c.join(" ")));
        }
    }
    pieces
        .into_iter()
        .enumerate()
        .map(|(k, text)| Document {
            id: format!("{}#{}", doc.id, k + 1),
            timestamp: doc.timestamp,
            text,
            location: doc.location.clone(),
            source_id: Some(doc.source_id.clone().unwrap_or_else(|| doc.id.clone())),
        })
        .collect()
}

/// Groups documents into consecutive calendar buckets. Buckets between the
/// first and last document are emitted even when empty so that slice indices
/// follow calendar positions. Documents within a slice are ordered by
/// timestamp, then id.
pub fn slice_corpus(docs: &[Document], granularity: Granularity) -> Result<Vec<TimeSlice>, CorpusError> {
    let mut buckets: BTreeMap<i64, Vec<Document>> = BTreeMap::new();
    for d in docs {
        buckets.entry(granularity.bucket(d.timestamp)).or_default().push(d.clone());
    }
    let (Some(&first), Some(&last)) = (buckets.keys().next(), buckets.keys().next_back()) else {
        return Err(CorpusError::EmptyCorpus);
    };
    Ok((first..=last)
        .enumerate()
        .map(|(i, b)| {
            let mut documents = buckets.remove(&b).unwrap_or_default();
            documents.sort_by(|x, y| x.timestamp.cmp(&y.timestamp).then_with(|| x.id.cmp(&y.id)));
            TimeSlice {
                index: i + 1,
                label: granularity.label(b),
                documents,
            }
        })
        .collect())
}

/// Draws `min(per_bucket, bucket size)` documents uniformly without
/// replacement from every calendar bucket. The result depends only on the
/// document set and the seed, not on input order.
pub fn sample_without_replacement(
    docs: &[Document],
    per_bucket: usize,
    granularity: Granularity,
    seed: u64,
) -> Vec<Document> {
    let mut buckets: BTreeMap<i64, Vec<&Document>> = BTreeMap::new();
    for d in docs {
        buckets.entry(granularity.bucket(d.timestamp)).or_default().push(d);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for (_, mut bucket) in buckets {
        bucket.sort_by(|a, b| a.id.cmp(&b.id));
        if bucket.len() <= per_bucket {
            out.extend(bucket.into_iter().cloned());
            continue;
        }
        let mut picked = rand::seq::index::sample(&mut rng, bucket.len(), per_bucket).into_vec();
        picked.sort_unstable();
        out.extend(picked.into_iter().map(|i| bucket[i].clone()));
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PrepareConfig {
    pub cleaning: CleaningConfig,
    /// Documents longer than this many tokens are split into sentences.
    pub max_tokens: usize,
    /// Per-bucket sampling quota; `None` keeps everything.
    pub sample_per_bucket: Option<usize>,
}

impl Default for PrepareConfig {
    fn default() -> Self {
        PrepareConfig {
            cleaning: CleaningConfig::default(),
            max_tokens: 64,
            sample_per_bucket: None,
        }
    }
}

/// Sentence splitting, cleaning (dropping documents that clean to nothing),
/// then optional per-bucket sampling.
pub fn prepare(docs: Vec<Document>, config: &PrepareConfig, granularity: Granularity, seed: u64) -> Vec<Document> {
    let cleaned: Vec<Document> = docs
        .iter()
        .flat_map(|d| split_sentences(d, config.max_tokens))
        .filter_map(|mut d| {
            d.text = clean(&d.text, &config.cleaning);
            (!d.text.is_empty()).then_some(d)
        })
        .collect();
    match config.sample_per_bucket {
        Some(n) => sample_without_replacement(&cleaned, n, granularity, seed),
        None => cleaned,
    }
}

const GERMAN_STOPWORDS: &str = include_str!("../data/stopwords/german.txt");
const ENGLISH_STOPWORDS: &str = include_str!("../data/stopwords/english.txt");

/// Parses a stopword list: one token per line, `#` starts a comment.
pub fn parse_stopwords(text: &str) -> HashSet<String> {
    text.lines()
        .map(|l| l.split('#').next().unwrap_or("").trim())
        .filter(|l| !l.is_empty())
        .map(str::to_lowercase)
        .collect()
}

pub fn load_stopwords(path: &Path) -> Result<HashSet<String>, CorpusError> {
    std::fs::read_to_string(path)
        .map(|s| parse_stopwords(&s))
        .map_err(|source| CorpusError::Io {
            path: path.display().to_string(),
            source,
        })
}

/// Bundled stopword list for `german` or `english`.
pub fn builtin_stopwords(language: &str) -> Option<HashSet<String>> {
    match language {
        "german" | "de" => Some(parse_stopwords(GERMAN_STOPWORDS)),
        "english" | "en" => Some(parse_stopwords(ENGLISH_STOPWORDS)),
        _ => None,
    }
}
