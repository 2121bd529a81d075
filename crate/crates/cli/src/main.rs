use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::{error, info, warn};
use thiserror::Error;

use topicbench::corpus;
use topicbench::runner::{self, emit_reports, read_metrics_csv, RunError, RunSummary};
use topicbench::synthgen::{self, SynthSpec};
use topicbench::{BackendDescriptor, ExperimentConfig, Granularity};

const EXIT_FAILURE: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_BACKEND: u8 = 3;
const EXIT_TIMEOUT: u8 = 4;

#[derive(Parser)]
#[command(name = "topicbench", version, about = "Incremental evaluation of dynamic topic models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Clean, split and slice a corpus; writes documents.jsonl and slices.csv.
    Ingest(IngestArgs),
    /// Run every increment of an experiment and write the reports.
    Run(RunArgs),
    /// Print the per-increment table and summary of a finished run.
    Report(ReportArgs),
    /// Generate a synthetic corpus with its planted topics.
    Synth(SynthArgs),
}

#[derive(Args)]
struct Overrides {
    /// Experiment configuration (TOML).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Corpus file (CSV or JSONL), replacing the configured corpus.
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    granularity: Option<Granularity>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct IngestArgs {
    #[command(flatten)]
    common: Overrides,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    common: Overrides,
    /// `native` or `external:<command line>`.
    #[arg(long)]
    backend: Option<String>,
    /// Output directory; defaults to `out_dir` from the config, then `results`.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    top_n: Option<usize>,
    #[arg(long)]
    timeout_secs: Option<u64>,
}

#[derive(Args)]
struct ReportArgs {
    /// Directory written by `run`.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SynthArgs {
    /// Generator settings (TOML); defaults apply otherwise.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory for corpus.jsonl and truth.jsonl.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Error)]
enum CliError {
    #[error(transparent)]
    Run(#[from] RunError),
    #[error("cannot write {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Run(e) => run_exit_code(e),
            CliError::Io { .. } => EXIT_FAILURE,
        }
    }
}

fn run_exit_code(e: &RunError) -> u8 {
    match e {
        _ if e.is_timeout() => EXIT_TIMEOUT,
        RunError::Config(_) | RunError::Corpus(_) | RunError::Synth(_) => EXIT_CONFIG,
        RunError::Backend { .. } | RunError::BackendStart(_) => EXIT_BACKEND,
        _ => EXIT_FAILURE,
    }
}

fn io_error(path: &Path) -> impl Fn(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Loads the config (relative corpus paths resolve against its directory)
/// and applies the shared flag overrides.
fn load_config(o: &Overrides) -> Result<ExperimentConfig, RunError> {
    let mut config = match &o.config {
        Some(path) => {
            let mut c = ExperimentConfig::load(path)?;
            let base = path.parent().unwrap_or(Path::new(""));
            if let Some(p) = &c.corpus.path {
                c.corpus.path = Some(base.join(p));
            }
            if let Some(p) = &c.text.stopwords_file {
                c.text.stopwords_file = Some(base.join(p));
            }
            c
        }
        None => ExperimentConfig::default(),
    };
    if let Some(input) = &o.input {
        config.corpus.path = Some(input.clone());
        config.corpus.synth = None;
    }
    if let Some(g) = o.granularity {
        config.granularity = g;
    }
    if let Some(seed) = o.seed {
        config.seed = seed;
    }
    Ok(config)
}

fn ingest(args: &IngestArgs) -> Result<(), CliError> {
    let config = load_config(&args.common)?;
    let slices = runner::load_slices(&config)?;
    fs::create_dir_all(&args.out).map_err(io_error(&args.out))?;
    let docs: Vec<_> = slices.iter().flat_map(|s| s.documents.iter().cloned()).collect();
    let docs_path = args.out.join("documents.jsonl");
    corpus::write_jsonl(&docs, &docs_path).map_err(io_error(&docs_path))?;
    let table_path = args.out.join("slices.csv");
    let mut table = String::from("slice_index,label,n_docs\n");
    for s in &slices {
        table.push_str(&format!("{},{},{}\n", s.index, s.label, s.len()));
    }
    fs::write(&table_path, table).map_err(io_error(&table_path))?;
    info!("{} documents in {} slices", docs.len(), slices.len());
    Ok(())
}

fn run(args: &RunArgs) -> Result<(), CliError> {
    let mut config = load_config(&args.common)?;
    if let Some(b) = &args.backend {
        config.backend = BackendDescriptor::parse_cli(b).map_err(|e| RunError::Config(e.to_string()))?;
    }
    if let Some(n) = args.top_n {
        config.top_n = n;
    }
    if let Some(t) = args.timeout_secs {
        config.timeout_secs = t;
    }
    let out = args
        .out
        .clone()
        .or_else(|| config.out_dir.clone())
        .unwrap_or_else(|| PathBuf::from("results"));
    config.validate()?;

    match runner::run_experiment(&config) {
        Ok(ledger) => {
            emit_reports(&ledger, &config, &out)?;
            info!("{} increments written to {}", ledger.metrics.len(), out.display());
            Ok(())
        }
        Err(aborted) => {
            if !aborted.ledger.metrics.is_empty() || matches!(aborted.error, RunError::Backend { .. }) {
                match emit_reports(&aborted.ledger, &config, &out) {
                    Ok(_) => warn!("partial reports written to {}", out.display()),
                    Err(e) => warn!("could not write partial reports: {e}"),
                }
            }
            Err(aborted.error.into())
        }
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |x| format!("{x:.4}"))
}

fn report(args: &ReportArgs) -> Result<(), CliError> {
    let metrics = read_metrics_csv(&args.out.join("metrics.csv"))?;
    let summary_path = args.out.join("summary.json");
    let text = fs::read_to_string(&summary_path).map_err(|e| RunError::Config(format!("cannot read {}: {e}", summary_path.display())))?;
    let summary: RunSummary = serde_json::from_str(&text).map_err(RunError::from)?;

    let stdout = std::io::stdout();
    let mut w = stdout.lock();
    let write_err = io_error(Path::new("<stdout>"));
    let mut lines = vec![format!(
        "{:>5}  {:<10} {:>7} {:>6} {:>8} {:>8} {:>8} {:>8} {:>8} {:>10}",
        "slice", "label", "docs", "topics", "density", "divers", "c_umass", "c_npmi", "c_v", "fit_ms"
    )];
    for r in &metrics {
        lines.push(format!(
            "{:>5}  {:<10} {:>7} {:>6} {:>8} {:>8} {:>8} {:>8} {:>8} {:>10.1}",
            r.slice_index,
            r.label,
            r.n_docs,
            r.n_topics,
            fmt_opt(r.density),
            fmt_opt(r.diversity),
            fmt_opt(r.coherence_umass),
            fmt_opt(r.coherence_npmi),
            fmt_opt(r.coherence_cv),
            r.fit_time_ms
        ));
    }
    lines.push(String::new());
    lines.push(format!(
        "backend {} (config {}){}",
        summary.backend,
        summary.config_hash,
        if summary.complete { "" } else { ", incomplete run" }
    ));
    for (name, value) in [
        ("avg coherence (UMass)", summary.avg_coherence_umass),
        ("avg coherence (NPMI)", summary.avg_coherence_npmi),
        ("avg coherence (C_v)", summary.avg_coherence_cv),
        ("avg diversity", summary.avg_diversity),
        ("avg density", summary.avg_density),
        ("avg stability", summary.avg_stability),
        ("avg evolution", summary.avg_tts),
    ] {
        lines.push(format!("{name:<24}{}", fmt_opt(value)));
    }
    lines.push(format!(
        "{:<24}{}",
        "avg execution time (ms)",
        summary.avg_execution_time_ms.map_or("-".to_string(), |v| format!("{v:.1}"))
    ));
    for l in lines {
        writeln!(w, "{l}").map_err(&write_err)?;
    }
    Ok(())
}

fn synth(args: &SynthArgs) -> Result<(), CliError> {
    let mut spec = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| RunError::Config(format!("cannot read {}: {e}", path.display())))?;
            toml::from_str::<SynthSpec>(&text).map_err(|e| RunError::Config(e.to_string()))?
        }
        None => SynthSpec::default(),
    };
    if let Some(seed) = args.seed {
        spec.seed = seed;
    }
    let corpus = synthgen::generate(&spec).map_err(RunError::from)?;
    fs::create_dir_all(&args.out).map_err(io_error(&args.out))?;
    let docs_path = args.out.join("corpus.jsonl");
    corpus::write_jsonl(&corpus.documents(), &docs_path).map_err(io_error(&docs_path))?;
    synthgen::write_truth_jsonl(&corpus.truth, &args.out.join("truth.jsonl")).map_err(RunError::from)?;
    info!("{} slices written to {}", corpus.slices.len(), args.out.display());
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_CONFIG } else { 0 });
        }
    };
    let result = match &cli.command {
        Command::Ingest(a) => ingest(a),
        Command::Run(a) => run(a),
        Command::Report(a) => report(a),
        Command::Synth(a) => synth(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            error!("{e}");
            ExitCode::from(e.exit_code())
        }
    }
}
