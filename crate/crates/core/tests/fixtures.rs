mod common;

use std::collections::BTreeSet;

use common::{fixture, reference_corpus, parser_cases, sample_corpus};
use omniact_core::backend::RuleTable;
use omniact_core::{compute_stats, GeneralAction, Level, SpecificAction, TargetModality};

#[test]
fn reference_fixture_matches_reported_counts() {
    let corpus = reference_corpus();
    let stats = compute_stats(&corpus).unwrap();
    assert_eq!(stats.entries, 382);
    let hist: Vec<usize> = stats.action_count_histogram.values().copied().collect();
    assert_eq!(hist, vec![183, 147, 44, 8]);
    let targets: Vec<usize> = TargetModality::ALL.iter().map(|t| stats.target_counts[t]).collect();
    assert_eq!(targets, vec![55, 120, 79, 77, 51]);
    let specific: Vec<usize> = SpecificAction::ALL.iter().map(|s| stats.specific_counts[s]).collect();
    assert_eq!(specific, vec![50, 150, 65, 110, 28, 14, 17, 100, 28, 8, 20, 20, 10, 7, 1, 3, 10]);
    let general: Vec<usize> = GeneralAction::ALL.iter().map(|g| stats.general_counts[g]).collect();
    // Share, Save, Remind, LookUp, DigitalExtract, Complex, MediaManipulation
    assert_eq!(general, vec![175, 181, 17, 123, 47, 8, 11]);
    // Reported percentages: 45.9, 47.4, 4.5, 32.1, 12.3, 2.1, 2.8.
    let pct: Vec<f64> = GeneralAction::ALL
        .iter()
        .map(|g| (stats.general_frequency[g] * 1000.0).round() / 10.0)
        .collect();
    assert_eq!(pct, vec![45.8, 47.4, 4.5, 32.2, 12.3, 2.1, 2.9]);
    assert_eq!(stats.specific_counts[&SpecificAction::Calculate], 1);
}

#[test]
fn sample_corpus_is_valid_and_covers_taxonomy() {
    let corpus = sample_corpus();
    assert!(corpus.len() >= 50);
    let covered: BTreeSet<SpecificAction> = corpus
        .iter()
        .flat_map(|e| e.labels.as_ref().unwrap().specific_actions.clone())
        .collect();
    assert_eq!(covered.len(), 17);
    let targets: BTreeSet<TargetModality> = corpus.iter().map(|e| e.labels.as_ref().unwrap().target).collect();
    assert_eq!(targets.len(), 5);
    assert!(corpus.iter().any(|e| !e.capture.is_visual()));
    assert!(corpus.iter().all(|e| e.labels.as_ref().unwrap().cot.is_some()));
}

#[test]
fn rule_tables_parse() {
    assert!(RuleTable::load(fixture("mock_rules.toml")).unwrap().len() >= 10);
    assert_eq!(RuleTable::load(fixture("ablation_rules.toml")).unwrap().len(), 6);
    let ablation = omniact_core::load_corpus(fixture("ablation_activity.jsonl")).unwrap();
    assert_eq!(ablation.len(), 36);
}


#[test]
fn parser_fixture_corpus() {
    let results = parser_cases();
    assert!(results.len() >= 20);
    let failed: Vec<&String> = results.iter().filter(|(_, ok, _)| !ok).map(|(n, _, _)| n).collect();
    assert!(failed.is_empty(), "failed cases: {failed:?}");
}

#[test]
fn dominant_on_reference_fixture() {
    let stats = compute_stats(&reference_corpus()).unwrap();
    let general: Vec<&str> = stats.top_actions(Level::General, 3).iter().map(|l| l.canonical_name()).collect();
    assert_eq!(general, vec!["Save", "Share", "LookUp"]);
    let specific: Vec<&str> = stats.top_actions(Level::Specific, 3).iter().map(|l| l.canonical_name()).collect();
    assert_eq!(specific, vec!["ShareWithOthers", "SaveForReference", "SearchOnline"]);
}
