//! Naive reference implementations of every measure, written for clarity
//! rather than speed: probabilities are recounted from scratch by scanning
//! the counting units for each query.

pub const EPS: f64 = 1e-12;

/// Counting units: whole documents, or every stride-1 window of `s` tokens
/// (a shorter non-empty document is a single window).
pub fn units(docs: &[Vec<String>], window: Option<usize>) -> Vec<Vec<String>> {
    let Some(s) = window else {
        return docs.to_vec();
    };
    let mut out = Vec::new();
    for doc in docs {
        if doc.is_empty() {
            continue;
        }
        let mut start = 0;
        loop {
            let end = (start + s).min(doc.len());
            out.push(doc[start..end].to_vec());
            if end == doc.len() {
                break;
            }
            start += 1;
        }
    }
    out
}

fn has(unit: &[String], w: &str) -> bool {
    unit.iter().any(|x| x == w)
}

pub fn count(units: &[Vec<String>], w: &str) -> usize {
    units.iter().filter(|u| has(u, w)).count()
}

pub fn count2(units: &[Vec<String>], a: &str, b: &str) -> usize {
    units.iter().filter(|u| has(u, a) && has(u, b)).count()
}

fn probs(units: &[Vec<String>], a: &str, b: &str) -> Option<(f64, f64, f64)> {
    let n = units.len() as f64;
    let (ca, cb) = (count(units, a), count(units, b));
    if ca == 0 || cb == 0 {
        return None;
    }
    Some((ca as f64 / n, cb as f64 / n, count2(units, a, b) as f64 / n))
}

pub fn pmi(units: &[Vec<String>], a: &str, b: &str) -> Option<f64> {
    let (pa, pb, pab) = probs(units, a, b)?;
    Some(((pab + EPS) / (pa * pb)).ln())
}

pub fn npmi(units: &[Vec<String>], a: &str, b: &str) -> Option<f64> {
    let (pa, pb, pab) = probs(units, a, b)?;
    let denom = -(pab + EPS).ln();
    if denom <= 0.0 {
        return Some(1.0);
    }
    let v = ((pab + EPS) / (pa * pb)).ln() / denom;
    Some(v.clamp(-1.0, 1.0))
}

fn average(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    let mut total = 0.0;
    for x in xs {
        total += x;
    }
    total / xs.len() as f64
}

pub fn umass_topic(units: &[Vec<String>], words: &[String]) -> f64 {
    let mut vals = Vec::new();
    for i in 0..words.len() {
        for j in 0..words.len() {
            if i <= j {
                continue;
            }
            let dj = count(units, &words[j]);
            if dj == 0 || count(units, &words[i]) == 0 {
                continue;
            }
            let joint = count2(units, &words[i], &words[j]);
            vals.push(((joint as f64 + 1.0) / dj as f64).ln());
        }
    }
    average(&vals)
}

pub fn npmi_topic(units: &[Vec<String>], words: &[String]) -> f64 {
    let mut vals = Vec::new();
    for i in 0..words.len() {
        for j in (i + 1)..words.len() {
            if let Some(v) = npmi(units, &words[i], &words[j]) {
                vals.push(v);
            }
        }
    }
    average(&vals)
}

pub fn cv_topic(units: &[Vec<String>], words: &[String]) -> f64 {
    let seen: Vec<&String> = words.iter().filter(|w| count(units, w) > 0).collect();
    let k = seen.len();
    let mut matrix = vec![vec![0.0; k]; k];
    for i in 0..k {
        for j in 0..k {
            matrix[i][j] = npmi(units, seen[i], seen[j]).unwrap();
        }
    }
    let mut context = vec![0.0; k];
    for row in &matrix {
        for j in 0..k {
            context[j] += row[j];
        }
    }
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let mut sims = Vec::new();
    for row in &matrix {
        let (a, b) = (norm(row), norm(&context));
        let dot: f64 = (0..k).map(|j| row[j] * context[j]).sum();
        sims.push(if a == 0.0 || b == 0.0 { 0.0 } else { dot / (a * b) });
    }
    average(&sims)
}

pub fn over_topics(topics: &[Vec<String>], f: impl Fn(&[String]) -> f64) -> Option<f64> {
    if topics.is_empty() {
        return None;
    }
    let vals: Vec<f64> = topics.iter().map(|t| f(t)).collect();
    Some(average(&vals))
}

fn slots(topics: &[Vec<String>]) -> Vec<String> {
    topics.iter().flatten().cloned().collect()
}

fn distinct(mut words: Vec<String>) -> usize {
    words.sort();
    words.dedup();
    words.len()
}

pub fn diversity(topics: &[Vec<String>]) -> Option<f64> {
    let all = slots(topics);
    if all.is_empty() {
        return None;
    }
    Some(distinct(all.clone()) as f64 / all.len() as f64)
}

pub fn density(topics: usize, docs: usize) -> Option<f64> {
    (docs > 0).then(|| topics as f64 / docs as f64)
}

pub fn evolution(past: &[Vec<String>], current: &[Vec<String>]) -> Option<f64> {
    let mut all = slots(past);
    all.extend(slots(current));
    if all.is_empty() {
        return None;
    }
    Some(distinct(all.clone()) as f64 / all.len() as f64)
}

fn word_set(t: &[String]) -> Vec<String> {
    let mut s = t.to_vec();
    s.sort();
    s.dedup();
    s
}

fn jaccard(a: &[String], b: &[String]) -> f64 {
    let inter = a.iter().filter(|w| b.contains(w)).count();
    let union = a.len() + b.len() - inter;
    if union == 0 {
        1.0
    } else {
        inter as f64 / union as f64
    }
}

/// Distinct word sets in topic order, first occurrence kept.
fn dedupe(topics: &[Vec<String>]) -> Vec<Vec<String>> {
    let mut out: Vec<Vec<String>> = Vec::new();
    for t in topics {
        let s = word_set(t);
        if !out.contains(&s) {
            out.push(s);
        }
    }
    out
}

/// Repeatedly pairs the most similar unmatched topics (lowest indices on
/// ties) while the similarity reaches the threshold.
pub fn stability_pair(a: &[Vec<String>], b: &[Vec<String>], threshold: f64) -> f64 {
    let (a, b) = (dedupe(a), dedupe(b));
    let mut used_a = vec![false; a.len()];
    let mut used_b = vec![false; b.len()];
    let mut matched = 0;
    loop {
        let mut best: Option<(f64, usize, usize)> = None;
        for i in 0..a.len() {
            for j in 0..b.len() {
                if used_a[i] || used_b[j] {
                    continue;
                }
                let s = jaccard(&a[i], &b[j]);
                if s < threshold {
                    continue;
                }
                if best.is_none_or(|(bs, _, _)| s > bs) {
                    best = Some((s, i, j));
                }
            }
        }
        let Some((_, i, j)) = best else { break };
        used_a[i] = true;
        used_b[j] = true;
        matched += 1;
    }
    let union = a.len() + b.len() - matched;
    if union == 0 {
        0.0
    } else {
        matched as f64 / union as f64
    }
}
