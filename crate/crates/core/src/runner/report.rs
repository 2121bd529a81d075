use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{ExperimentConfig, RunError, RunLedger};
use crate::metrics::{EvolutionRecord, MetricRecord, StabilityMatrix};
use crate::topics::Topic;

/// Files written by [`emit_reports`], in order.
pub const REPORT_FILES: [&str; 6] = [
    "metrics.csv",
    "evolution.csv",
    "stability.csv",
    "topics.jsonl",
    "config.toml",
    "summary.json",
];

const METRICS_HEADER: [&str; 10] = [
    "slice_index",
    "label",
    "n_docs",
    "n_topics",
    "density",
    "diversity",
    "c_umass",
    "c_npmi",
    "c_v",
    "fit_time_ms",
];

fn num(v: f64) -> String {
    format!("{v}")
}

fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

pub fn write_metrics_csv<W: Write>(records: &[MetricRecord], w: W) -> Result<(), RunError> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(METRICS_HEADER)?;
    for r in records {
        out.write_record([
            r.slice_index.to_string(),
            r.label.clone(),
            r.n_docs.to_string(),
            r.n_topics.to_string(),
            opt(r.density),
            opt(r.diversity),
            opt(r.coherence_umass),
            opt(r.coherence_npmi),
            opt(r.coherence_cv),
            num(r.fit_time_ms),
        ])?;
    }
    out.flush().map_err(csv::Error::from)?;
    Ok(())
}

fn parse_field<T: std::str::FromStr>(row: &csv::StringRecord, i: usize) -> Result<T, RunError> {
    let raw = row.get(i).unwrap_or("");
    raw.parse()
        .map_err(|_| RunError::Config(format!("metrics.csv: cannot parse `{raw}` in column {}", METRICS_HEADER[i])))
}

fn parse_opt(row: &csv::StringRecord, i: usize) -> Result<Option<f64>, RunError> {
    match row.get(i) {
        None | Some("") => Ok(None),
        Some(_) => parse_field(row, i).map(Some),
    }
}

pub fn read_metrics_csv(path: &Path) -> Result<Vec<MetricRecord>, RunError> {
    let mut rdr = csv::Reader::from_path(path)?;
    let header: Vec<String> = rdr.headers()?.iter().map(String::from).collect();
    if header != METRICS_HEADER {
        return Err(RunError::Config(format!("{}: unexpected header {header:?}", path.display())));
    }
    let mut records = Vec::new();
    for row in rdr.records() {
        let row = row?;
        records.push(MetricRecord {
            slice_index: parse_field(&row, 0)?,
            label: row.get(1).unwrap_or("").to_string(),
            n_docs: parse_field(&row, 2)?,
            n_topics: parse_field(&row, 3)?,
            density: parse_opt(&row, 4)?,
            diversity: parse_opt(&row, 5)?,
            coherence_umass: parse_opt(&row, 6)?,
            coherence_npmi: parse_opt(&row, 7)?,
            coherence_cv: parse_opt(&row, 8)?,
            fit_time_ms: parse_field(&row, 9)?,
        });
    }
    Ok(records)
}

pub fn write_evolution_csv<W: Write>(records: &[EvolutionRecord], inverted: bool, w: W) -> Result<(), RunError> {
    let mut out = csv::Writer::from_writer(w);
    let mut header = vec!["month_label", "increment_index", "past_count", "current_count", "tts"];
    if inverted {
        header.push("inverted");
    }
    out.write_record(&header)?;
    for r in records {
        let mut row = vec![
            r.month_label.clone(),
            r.increment_index.to_string(),
            r.past_count.to_string(),
            r.current_count.to_string(),
            num(r.tts),
        ];
        if inverted {
            row.push(num(r.inverted()));
        }
        out.write_record(&row)?;
    }
    out.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn write_stability_csv<W: Write>(m: &StabilityMatrix, w: W) -> Result<(), RunError> {
    let mut out = csv::Writer::from_writer(w);
    let mut header = vec!["label".to_string()];
    header.extend(m.labels.iter().cloned());
    out.write_record(&header)?;
    for (label, row) in m.labels.iter().zip(&m.values) {
        let mut cells = vec![label.clone()];
        cells.extend(row.iter().map(|v| num(*v)));
        out.write_record(&cells)?;
    }
    out.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn read_stability_csv(path: &Path) -> Result<StabilityMatrix, RunError> {
    let mut rdr = csv::Reader::from_path(path)?;
    let labels: Vec<String> = rdr.headers()?.iter().skip(1).map(String::from).collect();
    let mut values = Vec::new();
    for row in rdr.records() {
        let row = row?;
        let cells = row
            .iter()
            .skip(1)
            .map(|c| {
                c.parse::<f64>()
                    .map_err(|_| RunError::Config(format!("{}: bad value `{c}`", path.display())))
            })
            .collect::<Result<Vec<f64>, _>>()?;
        values.push(cells);
    }
    if values.len() != labels.len() || values.iter().any(|r| r.len() != labels.len()) {
        return Err(RunError::Config(format!("{}: matrix is not square", path.display())));
    }
    Ok(StabilityMatrix { labels, values })
}

/// Run-level totals and averages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub backend: String,
    pub config_hash: String,
    pub complete: bool,
    pub increments: usize,
    pub total_docs: usize,
    pub total_topics: usize,
    pub avg_coherence_umass: Option<f64>,
    pub avg_coherence_npmi: Option<f64>,
    pub avg_coherence_cv: Option<f64>,
    pub avg_diversity: Option<f64>,
    pub avg_density: Option<f64>,
    /// Mean off-diagonal entry of the stability matrix.
    pub avg_stability: Option<f64>,
    pub avg_tts: Option<f64>,
    pub total_fit_time_ms: f64,
    pub avg_execution_time_ms: Option<f64>,
}

fn mean(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let v: Vec<f64> = values.flatten().collect();
    if v.is_empty() {
        None
    } else {
        Some(v.iter().sum::<f64>() / v.len() as f64)
    }
}

/// Summary over metric rows; averages skip empty cells.
pub fn summarize(
    backend: &str,
    config_hash: &str,
    complete: bool,
    metrics: &[MetricRecord],
    evolution: &[EvolutionRecord],
    stability: Option<&StabilityMatrix>,
) -> RunSummary {
    RunSummary {
        backend: backend.to_string(),
        config_hash: config_hash.to_string(),
        complete,
        increments: metrics.len(),
        total_docs: metrics.last().map_or(0, |r| r.n_docs),
        total_topics: metrics.iter().map(|r| r.n_topics).sum(),
        avg_coherence_umass: mean(metrics.iter().map(|r| r.coherence_umass)),
        avg_coherence_npmi: mean(metrics.iter().map(|r| r.coherence_npmi)),
        avg_coherence_cv: mean(metrics.iter().map(|r| r.coherence_cv)),
        avg_diversity: mean(metrics.iter().map(|r| r.diversity)),
        avg_density: mean(metrics.iter().map(|r| r.density)),
        avg_stability: stability.and_then(StabilityMatrix::mean_off_diagonal),
        avg_tts: mean(evolution.iter().map(|r| Some(r.tts))),
        total_fit_time_ms: metrics.iter().map(|r| r.fit_time_ms).sum(),
        avg_execution_time_ms: mean(metrics.iter().map(|r| Some(r.fit_time_ms))),
    }
}

#[derive(Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum TopicsLine<'a> {
    Increment {
        backend: &'a str,
        config_hash: &'a str,
        slice_index: usize,
        label: &'a str,
        top_n: usize,
        topics: &'a [Topic],
    },
    Month {
        backend: &'a str,
        config_hash: &'a str,
        slice_index: usize,
        label: &'a str,
        increment_index: usize,
        top_n: usize,
        topics: &'a [Topic],
    },
}

fn create(path: &Path) -> Result<BufWriter<File>, RunError> {
    File::create(path).map(BufWriter::new).map_err(|source| RunError::Write {
        path: path.display().to_string(),
        source,
    })
}

fn io_at(path: &Path) -> impl Fn(std::io::Error) -> RunError + '_ {
    move |source| RunError::Write {
        path: path.display().to_string(),
        source,
    }
}

/// Writes all report files into `out_dir`, creating it if needed.
pub fn emit_reports(ledger: &RunLedger, config: &ExperimentConfig, out_dir: &Path) -> Result<Vec<PathBuf>, RunError> {
    fs::create_dir_all(out_dir).map_err(io_at(out_dir))?;
    let path = |name: &str| out_dir.join(name);

    write_metrics_csv(&ledger.metrics, create(&path("metrics.csv"))?)?;
    write_evolution_csv(
        &ledger.evolution,
        config.metrics.inverted_evolution,
        create(&path("evolution.csv"))?,
    )?;
    let empty = StabilityMatrix {
        labels: Vec::new(),
        values: Vec::new(),
    };
    write_stability_csv(ledger.stability.as_ref().unwrap_or(&empty), create(&path("stability.csv"))?)?;

    let topics_path = path("topics.jsonl");
    let mut out = create(&topics_path)?;
    for (set, record) in ledger.increments.iter().zip(&ledger.metrics) {
        let line = TopicsLine::Increment {
            backend: &set.backend,
            config_hash: &ledger.config_hash,
            slice_index: set.slice_index,
            label: &record.label,
            top_n: set.top_n,
            topics: &set.topics,
        };
        serde_json::to_writer(&mut out, &line)?;
        out.write_all(b"\n").map_err(io_at(&topics_path))?;
    }
    for month in &ledger.months {
        for (&step, set) in &month.snapshots {
            let line = TopicsLine::Month {
                backend: &set.backend,
                config_hash: &ledger.config_hash,
                slice_index: set.slice_index,
                label: &month.label,
                increment_index: step,
                top_n: set.top_n,
                topics: &set.topics,
            };
            serde_json::to_writer(&mut out, &line)?;
            out.write_all(b"\n").map_err(io_at(&topics_path))?;
        }
    }
    out.flush().map_err(io_at(&topics_path))?;

    let config_path = path("config.toml");
    fs::write(&config_path, config.to_toml()?).map_err(io_at(&config_path))?;

    let summary = summarize(
        &ledger.backend,
        &ledger.config_hash,
        ledger.complete,
        &ledger.metrics,
        &ledger.evolution,
        ledger.stability.as_ref(),
    );
    let summary_path = path("summary.json");
    let mut out = create(&summary_path)?;
    serde_json::to_writer_pretty(&mut out, &summary)?;
    out.write_all(b"\n").map_err(io_at(&summary_path))?;
    out.flush().map_err(io_at(&summary_path))?;

    Ok(REPORT_FILES.iter().map(|f| path(f)).collect())
}
