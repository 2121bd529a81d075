//! Acceptance suite. Runs as a plain binary so that every criterion prints
//! one PASS/FAIL line; exits non-zero if any criterion fails.

mod common;

use std::collections::HashSet;
use std::fs;
use std::panic::{self, AssertUnwindSafe};
use std::path::Path;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use common::{connect_in_process, oracle, random_corpus, random_topics, rng, synth_config, topic_set, words};
use rand::Rng;
use topicbench::backend::protocol;
use topicbench::backend::{BackendDescriptor, NativeLda};
use topicbench::corpus::{slice_corpus, Document, Granularity};
use topicbench::metrics::{
    build_stats, coherence_cv, coherence_npmi, coherence_umass, density, diversity, evolution, npmi, pmi,
    stability_pair, CountMode, EPSILON,
};
use topicbench::runner::{emit_reports, load_slices, read_metrics_csv, run_experiment, run_slices, RunSummary};
use topicbench::synthgen::{self, score_recovery, Drift, SynthSpec};
use topicbench::{Backend, ExperimentConfig, StabilityMatrix};

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

struct Worst {
    diff: f64,
    what: String,
    mismatches: Vec<String>,
}

impl Worst {
    fn new() -> Self {
        Worst {
            diff: 0.0,
            what: String::new(),
            mismatches: Vec::new(),
        }
    }

    fn cmp(&mut self, what: impl Fn() -> String, got: Option<f64>, want: Option<f64>) {
        match (got, want) {
            (Some(g), Some(w)) => {
                let d = (g - w).abs();
                if d.is_nan() || d > self.diff {
                    self.diff = d;
                    self.what = what();
                }
            }
            (None, None) => {}
            _ => self.mismatches.push(format!("{}: {got:?} vs {want:?}", what())),
        }
    }
}

fn oracle_equivalence() -> Outcome {
    let started = Instant::now();
    let mut worst = Worst::new();
    let mut checks = 0usize;
    for seed in 0..10u64 {
        let mut r = rng(1000 + seed);
        let v = r.random_range(6..=14);
        let n_docs = r.random_range(5..=50);
        let docs = random_corpus(&mut r, n_docs, v);
        let vocab: Vec<String> = (0..v + 2).map(|i| format!("t{i}")).collect();
        let window = [2usize, 3, 5, 110][r.random_range(0..4)];
        let (n_topics, n_other) = (r.random_range(1..=5), r.random_range(0..=5));
        let topics = random_topics(&mut r, n_topics, 6, v, 2);
        let other = random_topics(&mut r, n_other, 6, v, 2);
        let set = topic_set(&topics);

        for (mode, win) in [(CountMode::Document, None), (CountMode::Window(window), Some(window))] {
            let Ok(stats) = build_stats(&docs, None, mode) else {
                continue;
            };
            let units = oracle::units(&docs, win);
            let n = units.len() as f64;
            worst.cmp(|| format!("|units| seed {seed}"), Some(stats.n_docs() as f64), Some(n));
            for a in &vocab {
                worst.cmp(
                    || format!("P({a}) seed {seed}"),
                    Some(stats.df(a) as f64 / n),
                    Some(oracle::count(&units, a) as f64 / n),
                );
                for b in &vocab {
                    worst.cmp(
                        || format!("P({a},{b}) seed {seed}"),
                        Some(stats.pair_df(a, b) as f64 / n),
                        Some(oracle::count2(&units, a, b) as f64 / n),
                    );
                    worst.cmp(
                        || format!("PMI({a},{b}) seed {seed}"),
                        pmi(&stats, a, b, EPSILON).ok(),
                        oracle::pmi(&units, a, b),
                    );
                    worst.cmp(
                        || format!("NPMI({a},{b}) seed {seed}"),
                        npmi(&stats, a, b, EPSILON).ok(),
                        oracle::npmi(&units, a, b),
                    );
                    checks += 4;
                }
            }
            let filter: HashSet<String> = topics.iter().flatten().cloned().collect();
            let filtered = build_stats(&docs, Some(&filter), mode).expect("same units as unfiltered");
            for s in [&stats, &filtered] {
                if win.is_none() {
                    worst.cmp(
                        || format!("C_UMass seed {seed}"),
                        coherence_umass(&set, s).map(|c| c.value),
                        oracle::over_topics(&topics, |t| oracle::umass_topic(&units, t)),
                    );
                    worst.cmp(
                        || format!("C_NPMI seed {seed}"),
                        coherence_npmi(&set, s).map(|c| c.value),
                        oracle::over_topics(&topics, |t| oracle::npmi_topic(&units, t)),
                    );
                } else {
                    worst.cmp(
                        || format!("C_v seed {seed}"),
                        coherence_cv(&set, s).map(|c| c.value),
                        oracle::over_topics(&topics, |t| oracle::cv_topic(&units, t)),
                    );
                }
                checks += 2;
            }
        }

        let other_set = topic_set(&other);
        worst.cmp(|| format!("diversity seed {seed}"), diversity(&set), oracle::diversity(&topics));
        worst.cmp(|| format!("density seed {seed}"), density(set.len(), docs.len()), oracle::density(topics.len(), docs.len()));
        worst.cmp(|| format!("density(0 docs) seed {seed}"), density(set.len(), 0), oracle::density(topics.len(), 0));
        worst.cmp(
            || format!("evolution seed {seed}"),
            evolution(&other_set, &set).ok(),
            oracle::evolution(&other, &topics),
        );
        for threshold in [0.0, 0.25, 0.5, 1.0] {
            worst.cmp(
                || format!("stability@{threshold} seed {seed}"),
                Some(stability_pair(&set, &other_set, threshold)),
                Some(oracle::stability_pair(&topics, &other, threshold)),
            );
            worst.cmp(
                || format!("stability(S,S)@{threshold} seed {seed}"),
                Some(stability_pair(&set, &set, threshold)),
                Some(oracle::stability_pair(&topics, &topics, threshold)),
            );
        }
        checks += 11;
    }
    let secs = started.elapsed().as_secs_f64();
    check(
        worst.mismatches.is_empty() && worst.diff <= 1e-9 && secs < 10.0,
        format!(
            "{checks} comparisons on 10 corpora, max |diff| = {:.3e} ({}), {} definedness mismatches {:?}, {secs:.2}s",
            worst.diff,
            if worst.what.is_empty() { "-" } else { &worst.what },
            worst.mismatches.len(),
            worst.mismatches.iter().take(3).collect::<Vec<_>>()
        ),
    )
}

fn boundary_identities() -> Outcome {
    let mut failures = Vec::new();
    let mut expect = |ok: bool, what: String| {
        if !ok {
            failures.push(what);
        }
    };
    let docs = |spec: &[&str]| spec.iter().map(|d| words(d)).collect::<Vec<_>>();

    let coupled = build_stats(&docs(&["a b", "x", "y", "z"]), None, CountMode::Document).unwrap();
    let v = npmi(&coupled, "a", "b", EPSILON).unwrap();
    expect((v - 1.0).abs() < 1e-9, format!("coupled NPMI = {v}"));
    let always = build_stats(&docs(&["a b", "b a c"]), None, CountMode::Document).unwrap();
    let v = npmi(&always, "a", "b", EPSILON).unwrap();
    expect(v == 1.0, format!("always-together NPMI = {v}"));

    let indep = build_stats(&docs(&["a b", "a", "b", "x"]), None, CountMode::Document).unwrap();
    let v = npmi(&indep, "a", "b", EPSILON).unwrap();
    expect(v.abs() < 1e-6, format!("independent NPMI = {v}"));
    let big: Vec<Vec<String>> = (0..100)
        .map(|i| {
            let mut d = vec![format!("f{i}")];
            if i % 2 == 0 {
                d.push("a".into());
            }
            if i % 4 < 2 {
                d.push("b".into());
            }
            d
        })
        .collect();
    let indep = build_stats(&big, None, CountMode::Document).unwrap();
    let v = npmi(&indep, "a", "b", EPSILON).unwrap();
    expect(v.abs() < 1e-6, format!("independent NPMI (n=100) = {v}"));

    let mut r = rng(77);
    for trial in 0..50 {
        let n_topics = r.random_range(1..=6);
        let len = r.random_range(1..=10);
        let disjoint: Vec<Vec<String>> = (0..n_topics)
            .map(|t| (0..len).map(|i| format!("d{t}_{i}")).collect())
            .collect();
        let s = topic_set(&disjoint);
        expect(diversity(&s) == Some(1.0), format!("trial {trial}: disjoint diversity {:?}", diversity(&s)));
        let e = evolution(&s, &s).unwrap();
        expect(e == 0.5, format!("trial {trial}: evolution(S,S) with distinct words = {e}"));
        expect(stability_pair(&s, &s, 0.5) == 1.0, format!("trial {trial}: stability(S,S)"));

        let shared = random_topics(&mut r, n_topics, 6, 8, 0);
        let s2 = topic_set(&shared);
        let e = evolution(&s2, &s2).unwrap();
        expect(e <= 0.5, format!("trial {trial}: evolution(S,S) = {e} > 0.5"));
        let st = stability_pair(&s2, &s2, 0.5);
        expect(st == 1.0, format!("trial {trial}: stability(S,S) = {st}"));

        let renamed: Vec<Vec<String>> = shared.iter().map(|t| t.iter().map(|w| format!("z{w}")).collect()).collect();
        let st = stability_pair(&s2, &topic_set(&renamed), 0.5);
        expect(st == 0.0, format!("trial {trial}: disjoint stability = {st}"));
    }
    check(failures.is_empty(), if failures.is_empty() {
        "NPMI coupling/independence, disjoint diversity, evolution(S,S) <= 0.5 (= 0.5 when distinct), stability(S,S) = 1, disjoint stability = 0 over 50 random trials".into()
    } else {
        failures.join("; ")
    })
}

fn recovery_spec(seed: u64, drift: Drift) -> SynthSpec {
    SynthSpec {
        vocab_size: 30,
        topics: 3,
        slices: 5,
        docs_per_slice: 300,
        drift,
        seed,
        ..Default::default()
    }
}

fn planted_recovery() -> Outcome {
    let started = Instant::now();
    let mut per_seed = Vec::new();
    for seed in 1..=5u64 {
        let spec = recovery_spec(seed, Drift::None);
        let truth = synthgen::generate(&spec).map_err(|e| e.to_string())?.truth;
        let config = synth_config(spec);
        let ledger = run_experiment(&config).map_err(|e| e.to_string())?;
        let scores: Vec<f64> = ledger
            .increments
            .iter()
            .zip(&truth)
            .map(|(got, planted)| score_recovery(got, &planted.top_topics(10), 10).unwrap_or(0.0))
            .collect();
        per_seed.push(scores.iter().sum::<f64>() / scores.len() as f64);
    }
    let mean = per_seed.iter().sum::<f64>() / per_seed.len() as f64;
    let secs = started.elapsed().as_secs_f64();
    check(
        mean >= 0.8 && secs < 60.0,
        format!("mean precision {mean:.4} over seeds 1..=5 (per seed {per_seed:.3?}), {secs:.1}s"),
    )
}

fn regime_means(m: &StabilityMatrix, shift: usize) -> (f64, f64) {
    let (mut cross, mut nc, mut within, mut nw) = (0.0, 0, 0.0, 0);
    for i in 0..m.labels.len() {
        for j in i + 1..m.labels.len() {
            let pre_i = i + 1 < shift;
            let pre_j = j + 1 < shift;
            if pre_i == pre_j {
                within += m.values[i][j];
                nw += 1;
            } else {
                cross += m.values[i][j];
                nc += 1;
            }
        }
    }
    (cross / nc as f64, within / nw as f64)
}

fn drift_detection() -> Outcome {
    let started = Instant::now();
    let config = synth_config(recovery_spec(3, Drift::ShiftAt(3)));
    let ledger = run_experiment(&config).map_err(|e| e.to_string())?;
    let m = ledger.stability.ok_or("no stability matrix")?;
    let (cross, within) = regime_means(&m, 3);
    let secs = started.elapsed().as_secs_f64();
    check(
        cross <= 0.2 && within >= 0.6 && secs < 90.0,
        format!("shift at slice 3: mean cross-shift {cross:.3} (<= 0.2), mean within-regime {within:.3} (>= 0.6), {secs:.1}s"),
    )
}

fn chaining_effect() -> Outcome {
    let mut rows = Vec::new();
    let mut ok = true;
    for seed in 1..=3u64 {
        let mut stab = [0.0; 2];
        for (slot, decay) in [(0, 1.0), (1, 0.0)] {
            let mut config = synth_config(recovery_spec(seed, Drift::None));
            config.native.decay = decay;
            let ledger = run_experiment(&config).map_err(|e| e.to_string())?;
            stab[slot] = ledger
                .stability
                .and_then(|m| m.mean_off_diagonal())
                .ok_or("no stability")?;
        }
        ok &= stab[0] >= stab[1];
        rows.push(format!("seed {seed}: decay=1 {:.3} vs decay=0 {:.3}", stab[0], stab[1]));
    }
    check(ok, rows.join(", "))
}

fn without_timing(csv: &str) -> String {
    csv.lines()
        .map(|l| l.rsplit_once(',').map_or(l, |(head, _)| head))
        .collect::<Vec<_>>()
        .join("\n")
}

fn determinism() -> Outcome {
    let mut spec = recovery_spec(9, Drift::ShiftAt(3));
    spec.docs_per_slice = 120;
    let config = synth_config(spec);
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    for d in &dirs {
        let ledger = run_experiment(&config).map_err(|e| e.to_string())?;
        emit_reports(&ledger, &config, d.path()).map_err(|e| e.to_string())?;
    }
    let read = |d: &Path, f: &str| fs::read(d.join(f)).unwrap();
    let mut differing = Vec::new();
    for f in ["evolution.csv", "stability.csv", "topics.jsonl", "config.toml"] {
        if read(dirs[0].path(), f) != read(dirs[1].path(), f) {
            differing.push(f);
        }
    }
    let m = |d: &Path| without_timing(&String::from_utf8(read(d, "metrics.csv")).unwrap());
    if m(dirs[0].path()) != m(dirs[1].path()) {
        differing.push("metrics.csv");
    }
    check(
        differing.is_empty(),
        if differing.is_empty() {
            "evolution.csv, stability.csv, topics.jsonl byte-identical; metrics.csv identical in every column except measured fit_time_ms".into()
        } else {
            format!("files differ: {differing:?}")
        },
    )
}

fn timing_harness() -> Outcome {
    let mut spec = recovery_spec(4, Drift::None);
    spec.slices = 4;
    spec.docs_per_slice = 20;
    let config = synth_config(spec);
    let slices = load_slices(&config).map_err(|e| e.to_string())?;
    let mut backend = common::SleepyBackend {
        delay: Duration::from_millis(50),
    };
    let ledger = run_slices(&config, &slices, &mut backend).map_err(|e| e.to_string())?;
    let dir = tempfile::tempdir().unwrap();
    emit_reports(&ledger, &config, dir.path()).map_err(|e| e.to_string())?;
    let recorded: Vec<f64> = read_metrics_csv(&dir.path().join("metrics.csv"))
        .map_err(|e| e.to_string())?
        .iter()
        .map(|r| r.fit_time_ms)
        .collect();
    let summary: RunSummary =
        serde_json::from_str(&fs::read_to_string(dir.path().join("summary.json")).unwrap()).map_err(|e| e.to_string())?;
    let mean = recorded.iter().sum::<f64>() / recorded.len() as f64;
    let in_range = recorded.iter().all(|t| (50.0..=500.0).contains(t));
    check(
        in_range && recorded.len() == 4 && summary.avg_execution_time_ms == Some(mean),
        format!(
            "fit_time_ms {:?}, summary avg {:?} vs column mean {mean}",
            recorded.iter().map(|t| format!("{t:.2}")).collect::<Vec<_>>(),
            summary.avg_execution_time_ms
        ),
    )
}

fn tiny_corpus() -> Vec<Document> {
    let d = |id: &str, date: &str, text: &str| {
        Document::new(id, topicbench::corpus::parse_timestamp(date).unwrap(), text).unwrap()
    };
    vec![
        d("t1", "2020-01-05", "corona wuhan virus"),
        d("t2", "2020-01-20", "corona virus mask"),
        d("t3", "2020-02-02", "lockdown school closed"),
        d("t4", "2020-02-14", "corona mask"),
    ]
}

fn protocol_conformance() -> Outcome {
    let golden = include_str!("data/golden_transcript.txt");
    let mut problems = Vec::new();
    for line in golden.lines() {
        let (dir, body) = line.split_at(3);
        let again = match dir {
            "-> " => protocol::decode_request(body).map(|m| protocol::encode(&m)),
            "<- " => protocol::decode_reply(body).map(|m| protocol::encode(&m)),
            _ => {
                problems.push(format!("bad direction prefix in `{line}`"));
                continue;
            }
        };
        if again.as_deref().ok() != Some(body) {
            problems.push(format!("line does not round-trip: {body}"));
        }
    }

    let mut config = ExperimentConfig {
        top_n: 3,
        ..Default::default()
    };
    config.metrics.cv_window = 2;
    let slices = slice_corpus(&tiny_corpus(), Granularity::Month).unwrap();
    let mut descriptor = BackendDescriptor::external("firstword", vec!["in-process".into()]);
    descriptor.params.insert("min-topic-size".into(), "2".into());
    let (mut client, server) = connect_in_process(&descriptor, Duration::from_secs(10), |_| {
        Ok(Box::new(common::FirstWordBackend::new("firstword")) as Box<dyn Backend>)
    });
    run_slices(&config, &slices, &mut client).map_err(|e| e.to_string())?;
    client.shutdown().map_err(|e| e.to_string())?;
    server.join().unwrap().map_err(|e| e.to_string())?;
    let transcript = client.transcript().join("\n");
    if transcript != golden.trim_end() {
        problems.push(format!("transcript differs from golden:\n{transcript}"));
    }

    let mut spec = recovery_spec(5, Drift::ShiftAt(2));
    spec.slices = 3;
    spec.docs_per_slice = 100;
    let config = synth_config(spec);
    let slices = load_slices(&config).map_err(|e| e.to_string())?;
    let make_native = {
        let config = config.clone();
        move || NativeLda::new("lda", config.native.clone(), Default::default(), config.text.tokenize.clone(), config.seed)
    };
    let mut native = make_native().map_err(|e| e.to_string())?;
    let direct = run_slices(&config, &slices, &mut native).map_err(|e| e.to_string())?;

    let mut descriptor = BackendDescriptor::external("lda", vec!["in-process".into()]);
    descriptor.cumulative = Some(false);
    let (mut client, server) = connect_in_process(&descriptor, Duration::from_secs(60), move |_| {
        make_native().map(|b| Box::new(b) as Box<dyn Backend>).map_err(|e| e.to_string())
    });
    let remote = run_slices(&config, &slices, &mut client).map_err(|e| e.to_string())?;
    client.shutdown().map_err(|e| e.to_string())?;
    server.join().unwrap().map_err(|e| e.to_string())?;

    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    emit_reports(&direct, &config, dirs[0].path()).map_err(|e| e.to_string())?;
    emit_reports(&remote, &config, dirs[1].path()).map_err(|e| e.to_string())?;
    let metrics = |d: &Path| without_timing(&fs::read_to_string(d.join("metrics.csv")).unwrap());
    if metrics(dirs[0].path()) != metrics(dirs[1].path()) {
        problems.push("metrics.csv differs between native and protocol delivery".into());
    }
    let increments = |d: &Path| -> Vec<String> {
        fs::read_to_string(d.join("topics.jsonl"))
            .unwrap()
            .lines()
            .filter(|l| l.starts_with(r#"{"kind":"increment""#))
            .map(String::from)
            .collect()
    };
    let (a, b) = (increments(dirs[0].path()), increments(dirs[1].path()));
    if a != b {
        let first = a.iter().zip(&b).find(|(x, y)| x != y);
        problems.push(format!("increment topic sets differ between native and protocol delivery: {first:?}"));
    }
    check(
        problems.is_empty(),
        if problems.is_empty() {
            format!(
                "{} golden lines round-trip and replay exactly; {} increments score identically natively and over the protocol",
                golden.lines().count(),
                direct.metrics.len()
            )
        } else {
            problems.join("; ")
        },
    )
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() -> ExitCode {
    let criteria: [Criterion; 8] = [
        ("metric-oracle equivalence", oracle_equivalence),
        ("boundary identities", boundary_identities),
        ("planted-topic recovery", planted_recovery),
        ("drift detection", drift_detection),
        ("chaining effect", chaining_effect),
        ("determinism", determinism),
        ("timing harness", timing_harness),
        ("protocol conformance", protocol_conformance),
    ];
    let mut failed = 0;
    for (name, run) in criteria {
        let started = Instant::now();
        let outcome = panic::catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let secs = started.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS  {name}: {detail} [{secs:.1}s]"),
            Err(detail) => {
                failed += 1;
                println!("FAIL  {name}: {detail} [{secs:.1}s]");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
