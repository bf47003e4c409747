#![allow(dead_code)]

use std::path::PathBuf;

use omniact_core::parser::ParseError;
use omniact_core::{load_corpus, parse_prediction, DiaryEntry, Purpose};
use serde::Deserialize;

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

pub fn sample_corpus() -> Vec<DiaryEntry> {
    load_corpus(fixture("sample_corpus.jsonl")).expect("sample corpus loads")
}

pub fn reference_corpus() -> Vec<DiaryEntry> {
    load_corpus(fixture("reference_distribution.jsonl")).expect("paper-distribution fixture loads")
}

/// Brute-force per-sample score written without the library: distinct
/// predictions are compared pairwise against the truth by name.
pub fn oracle_score(truth: &[&str], predicted: &[&str]) -> f64 {
    let mut distinct: Vec<&str> = Vec::new();
    for p in predicted {
        if !distinct.iter().any(|d| d == p) {
            distinct.push(p);
        }
    }
    let mut hits = 0usize;
    for p in &distinct {
        for g in truth {
            if p == g {
                hits += 1;
                break;
            }
        }
    }
    let denom = if truth.len() < distinct.len() { truth.len() } else { distinct.len() };
    if denom == 0 {
        0.0
    } else {
        hits as f64 / denom as f64
    }
}

pub fn oracle_accuracy(samples: &[(Vec<&str>, Vec<&str>)]) -> f64 {
    let mut total = 0.0;
    for (g, p) in samples {
        total += oracle_score(g, p);
    }
    total / samples.len() as f64
}

/// Enumerates the generator's sampling distribution exactly and returns the
/// expected score of a fixed prediction list. `level_of` maps a specific
/// action index to the label compared against `predicted`.
pub fn expected_dominant_score(
    target_weights: &[f64],
    count_weights: &[f64],
    weights_for_target: &dyn Fn(usize) -> [f64; 17],
    level_of: &dyn Fn(usize) -> String,
    predicted: &[String],
) -> f64 {
    let t_total: f64 = target_weights.iter().sum();
    let k_total: f64 = count_weights.iter().sum();
    let mut expectation = 0.0;
    for (t, tw) in target_weights.iter().enumerate() {
        let w = weights_for_target(t);
        for (ki, kw) in count_weights.iter().enumerate() {
            let k = ki + 1;
            let mut seq = Vec::new();
            let mut acc = 0.0;
            walk(&w, k, &mut seq, 1.0, &mut |chosen: &[usize], p: f64| {
                let mut truth: Vec<String> = Vec::new();
                for &a in chosen {
                    let l = level_of(a);
                    if !truth.contains(&l) {
                        truth.push(l);
                    }
                }
                let g: Vec<&str> = truth.iter().map(String::as_str).collect();
                let pr: Vec<&str> = predicted.iter().map(String::as_str).collect();
                acc += p * oracle_score(&g, &pr);
            });
            expectation += (tw / t_total) * (kw / k_total) * acc;
        }
    }
    expectation
}

fn walk(w: &[f64; 17], k: usize, seq: &mut Vec<usize>, p: f64, f: &mut dyn FnMut(&[usize], f64)) {
    if seq.len() == k {
        f(seq, p);
        return;
    }
    let remaining: f64 = (0..17).filter(|i| !seq.contains(i)).map(|i| w[i]).sum();
    if remaining <= 0.0 {
        return;
    }
    for i in 0..17 {
        if seq.contains(&i) || w[i] == 0.0 {
            continue;
        }
        seq.push(i);
        walk(w, k, seq, p * w[i] / remaining, f);
        seq.pop();
    }
}

#[derive(Deserialize)]
struct Case {
    name: String,
    raw: String,
    purpose: String,
    n: usize,
    #[serde(default)]
    expected_labels: Option<Vec<String>>,
    #[serde(default)]
    expected_warnings: Vec<String>,
    #[serde(default)]
    expected_error: Option<String>,
}

pub fn parser_cases() -> Vec<(String, bool, String)> {
    let text = std::fs::read_to_string(fixture("parser_cases.jsonl")).unwrap();
    text.lines()
        .map(|line| {
            let case: Case = serde_json::from_str(line).unwrap();
            let purpose: Purpose = case.purpose.parse().unwrap();
            let got = parse_prediction(&case.raw, purpose, case.n);
            let ok = match (&case.expected_error, got) {
                (Some(e), Err(err)) => {
                    let kind = match err {
                        ParseError::Empty => "empty",
                        ParseError::NoJson => "no_json",
                    };
                    kind == e
                }
                (None, Ok(set)) => {
                    let labels: Vec<String> = set.labels().iter().map(|l| l.canonical_name().to_string()).collect();
                    let warnings: Vec<String> = set.warnings.iter().map(|w| w.kind().to_string()).collect();
                    Some(labels) == case.expected_labels && warnings == case.expected_warnings
                }
                _ => false,
            };
            (case.name, ok, line.to_string())
        })
        .collect()
}
