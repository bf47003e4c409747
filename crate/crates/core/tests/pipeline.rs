mod common;

use std::path::Path;
use std::sync::Arc;

use common::{expected_dominant_score, fixture, sample_corpus};
use omniact_core::backend::{Backend, BackendConfig, CachedBackend, MockBackend, ResponseCache, RuleTable};
use omniact_core::evaluator::{ablation_grid, eval_actions, eval_target, ModalityFilter, Technique};
use omniact_core::export::{export_finetune_chat, export_finetune_legacy, read_chat_jsonl, read_legacy_jsonl, to_jsonl, LegacyTask};
use omniact_core::prompt::{build_cot_generation_prompt, build_target_prompt, select_fewshots_actions};
use omniact_core::synth::{action_weights, ACTION_COUNT_WEIGHTS, TARGET_WEIGHTS};
use omniact_core::{
    build_action_prompt, build_backend, compute_stats, generate_synthetic, load_corpus, parse_prediction, ContextVariant,
    EvalConfig, Family, Level, Purpose, SpecificAction, SynthConfig, TargetModality,
};

fn rules_backend() -> MockBackend {
    MockBackend::rules(RuleTable::load(fixture("mock_rules.toml")).unwrap())
}

#[test]
fn oracle_scores_one_everywhere() {
    let corpus = sample_corpus();
    let oracle = MockBackend::oracle(&corpus).unwrap();
    for level in [Level::General, Level::Specific] {
        for top_n in 1..=3 {
            for technique in [Technique::Oracle, Technique::Icl, Technique::Classifier] {
                let config = EvalConfig { technique, level, top_n, ..Default::default() };
                let report = eval_actions(&config, &corpus, &oracle).unwrap();
                assert_eq!(report.accuracy, Some(1.0), "{technique:?} {level} top-{top_n}");
                assert_eq!(report.parse_failures, 0);
            }
        }
    }
    let target = eval_target(&EvalConfig { technique: Technique::Oracle, ..Default::default() }, &corpus, &oracle).unwrap();
    assert_eq!(target.modality_accuracy.visual, Some(1.0));
    assert_eq!(target.modality_accuracy.audio, Some(1.0));
    let grid = ablation_grid(&EvalConfig { technique: Technique::Oracle, ..Default::default() }, &corpus, &oracle).unwrap();
    let cells = grid.ablation.unwrap();
    for f in ModalityFilter::ROWS {
        for v in ContextVariant::ALL {
            assert_eq!(cells.get(f, v), Some(1.0));
        }
    }
}

#[test]
fn target_audio_absent_when_no_audio() {
    let corpus: Vec<_> = sample_corpus().into_iter().filter(|e| e.labels.as_ref().unwrap().target.family() == Family::Visual).collect();
    let oracle = MockBackend::oracle(&corpus).unwrap();
    let report = eval_target(&EvalConfig { technique: Technique::Oracle, ..Default::default() }, &corpus, &oracle).unwrap();
    assert_eq!(report.modality_accuracy.audio, None);
    assert_eq!(report.accuracy, None);
    assert!(report.to_json().contains("\"audio\": null"));
}

#[test]
fn dominant_matches_analytic_expectation() {
    let corpus = generate_synthetic(SynthConfig { seed: 11, n: 1000 });
    for level in [Level::General, Level::Specific] {
        for top_n in 1..=3 {
            let config = EvalConfig { technique: Technique::Dominant, level, top_n, split_seed: 5, ..Default::default() };
            let report = eval_actions(&config, &corpus, &MockBackend::empty_rules()).unwrap();
            let predicted: Vec<String> = report.samples[0].predicted.clone();
            let level_of = |a: usize| match level {
                Level::Specific => SpecificAction::ALL[a].canonical_name().to_string(),
                Level::General => SpecificAction::ALL[a].general().canonical_name().to_string(),
            };
            let weights = |t: usize| action_weights(TargetModality::ALL[t].family());
            let expected = expected_dominant_score(&TARGET_WEIGHTS, &ACTION_COUNT_WEIGHTS, &weights, &level_of, &predicted);
            let got = report.accuracy.unwrap();
            assert!((got - expected).abs() <= 0.05, "{level} top-{top_n}: {got} vs {expected}");
        }
    }
}

#[test]
fn cached_rerun_is_identical_and_free() {
    let corpus = sample_corpus();
    let dir = tempfile::tempdir().unwrap();
    let inner: Arc<dyn Backend> = Arc::new(rules_backend());
    let config = EvalConfig { technique: Technique::Icl, split_seed: 7, ..Default::default() };
    let first = CachedBackend::new(inner.clone(), ResponseCache::disk(dir.path()).unwrap());
    let a = eval_actions(&config, &corpus, &first).unwrap().to_json();
    assert!(first.requests_issued() > 0);
    let second = CachedBackend::new(inner, ResponseCache::disk(dir.path()).unwrap());
    let b = eval_actions(&config, &corpus, &second).unwrap().to_json();
    assert_eq!(a, b);
    assert_eq!(second.requests_issued(), 0);
}

#[test]
fn activity_rules_help_with_context() {
    let corpus = load_corpus(fixture("ablation_activity.jsonl")).unwrap();
    let backend = MockBackend::rules(RuleTable::load(fixture("ablation_rules.toml")).unwrap());
    let config = EvalConfig { technique: Technique::Finetuned, top_n: 1, ..Default::default() };
    let report = ablation_grid(&config, &corpus, &backend).unwrap();
    let grid = report.ablation.clone().unwrap();
    for f in ModalityFilter::ROWS {
        let none = grid.get(f, ContextVariant::NoContext).unwrap();
        let full = grid.get(f, ContextVariant::Full).unwrap();
        let activity = grid.get(f, ContextVariant::ActivityOnly).unwrap();
        assert!(full >= none && activity >= none, "{f:?}");
        assert_eq!(full, 1.0);
    }
    assert!(report.render_text().contains("Audio only"));
}

#[test]
fn chocolate_capture_through_mock() {
    let corpus = sample_corpus();
    let choc = corpus.iter().find(|e| e.capture.visible_text.iter().any(|t| t.contains("CHOCOLATE"))).unwrap();
    let backend = rules_backend();
    let target = build_target_prompt(choc, Family::Visual, None).unwrap();
    let t = parse_prediction(&backend.chat(&target).unwrap(), Purpose::TargetVisual, 1).unwrap();
    assert_eq!(t.labels()[0].as_target(), Some(TargetModality::Text));
    let actions = build_action_prompt(choc, Level::Specific, 3, None, ContextVariant::Full).unwrap();
    let a = parse_prediction(&backend.chat(&actions).unwrap(), Purpose::ActionSpecific, 3).unwrap();
    assert!(a.labels().iter().any(|l| l.canonical_name() == "SearchOnline"));
}

#[test]
fn jeans_cot_mentions_looking_up_style() {
    let corpus = sample_corpus();
    let jeans = corpus.iter().find(|e| e.capture.objects.iter().any(|o| o == "jeans")).unwrap();
    let bundle = build_cot_generation_prompt(jeans).unwrap();
    let out = parse_prediction(&rules_backend().chat(&bundle).unwrap(), Purpose::CotGen, 4).unwrap();
    let cot = out.predictions[0].cot.to_lowercase();
    assert!(cot.contains("look it up online") && cot.contains("style"), "{cot}");
    assert!(!cot.contains(" i "));
}

#[test]
fn fewshot_selection_on_sample_corpus() {
    let corpus = sample_corpus();
    let sel = select_fewshots_actions(&corpus);
    assert_eq!(sel.store.entries[0].labels.as_ref().unwrap().specific_actions.len(), 4);
    assert!(sel.uncovered.is_empty());
    let without: Vec<_> = corpus
        .into_iter()
        .filter(|e| !e.labels.as_ref().unwrap().specific_actions.contains(&SpecificAction::Calculate))
        .collect();
    assert_eq!(select_fewshots_actions(&without).uncovered, vec![SpecificAction::Calculate]);
}

#[test]
fn exports_round_trip() {
    let corpus = sample_corpus();
    for level in [Level::General, Level::Specific] {
        let chat = export_finetune_chat(&corpus, level).unwrap();
        assert_eq!(read_chat_jsonl(&to_jsonl(&chat)).unwrap(), chat);
        let legacy = export_finetune_legacy(&corpus, LegacyTask::Action(level)).unwrap();
        let expected: usize = corpus.iter().map(|e| e.labels.as_ref().unwrap().actions(level).len()).sum();
        assert_eq!(legacy.len(), expected);
        assert_eq!(read_legacy_jsonl(&to_jsonl(&legacy)).unwrap(), legacy);
    }
    let targets = export_finetune_legacy(&corpus, LegacyTask::Target).unwrap();
    assert_eq!(targets.len(), corpus.len());
}

#[test]
fn config_file_builds_cached_mock() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = format!(
        "kind = \"mock\"\nrules = \"{}\"\ncache_dir = \"{}\"\n",
        fixture("mock_rules.toml").display(),
        dir.path().join("cache").display()
    );
    let backend = build_backend(&BackendConfig::from_toml(&cfg).unwrap(), Path::new(".")).unwrap();
    let corpus = sample_corpus();
    let b = build_action_prompt(&corpus[0], Level::Specific, 3, None, ContextVariant::Full).unwrap();
    backend.chat(&b).unwrap();
    assert_eq!(std::fs::read_dir(dir.path().join("cache")).unwrap().count(), 1);
}

#[test]
fn sample_stats_are_sane() {
    let stats = compute_stats(&sample_corpus()).unwrap();
    assert!(stats.visual_entries > stats.audio_only_entries);
}
