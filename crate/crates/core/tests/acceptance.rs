//! Acceptance gate. Run with `--nocapture` to see one line per criterion.

mod common;

use std::sync::Arc;
use std::time::{Duration, Instant};

use common::{fixture, oracle_accuracy, reference_corpus, sample_corpus};
use omniact_core::backend::{Backend, CachedBackend, MockBackend, ResponseCache, RuleTable};
use omniact_core::evaluator::{ablation_grid, confusion, dominant_baseline, eval_actions, ModalityFilter, Technique};
use omniact_core::export::{
    export_finetune_chat, export_finetune_legacy, read_chat_jsonl, read_legacy_jsonl, to_jsonl, LegacyTask,
};
use omniact_core::prompt::{action_system_prompt, cot_system_prompt, target_system_prompt};
use omniact_core::{
    compute_stats, full_match_accuracy, generate_synthetic, load_corpus, parse_prediction, ActionLabel, ContextVariant,
    EvalConfig, Family, GeneralAction, Level, Purpose, SampleScore, SpecificAction, SynthConfig, TargetModality,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn within(elapsed: Duration, limit: Duration) -> Result<(), String> {
    check(elapsed < limit, format!("took {elapsed:?}, limit {limit:?}"))
}

fn random_set(rng: &mut ChaCha8Rng, max: usize) -> Vec<ActionLabel> {
    let k = rng.random_range(0..=max);
    let mut out = Vec::new();
    while out.len() < k {
        let l = ActionLabel::Specific(SpecificAction::ALL[rng.random_range(0..17)]);
        if !out.contains(&l) {
            out.push(l);
        }
    }
    out
}

fn metric_oracle_equivalence() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1000);
    let mut scores = Vec::new();
    let mut pairs = Vec::new();
    for i in 0..1000 {
        let g = random_set(&mut rng, 4);
        let g = if g.is_empty() { vec![ActionLabel::Specific(SpecificAction::Remind)] } else { g };
        let p = random_set(&mut rng, 3);
        scores.push(SampleScore::new(i.to_string(), g.clone(), p.clone()));
        pairs.push((g, p));
    }
    let named: Vec<(Vec<&str>, Vec<&str>)> = pairs
        .iter()
        .map(|(g, p)| (g.iter().map(|l| l.canonical_name()).collect(), p.iter().map(|l| l.canonical_name()).collect()))
        .collect();
    let ours = full_match_accuracy(&scores).map_err(|e| e.to_string())?;
    let theirs = oracle_accuracy(&named);
    check(ours == theirs, format!("library {ours} vs oracle {theirs}"))?;
    for (s, (g, p)) in scores.iter().zip(&named) {
        check(s.score == common::oracle_score(g, p), format!("sample {} differs", s.entry_id))?;
    }
    within(start.elapsed(), Duration::from_secs(5))?;
    Ok(format!("1000 instances, accuracy {ours:.6} identical to brute force, {:?}", start.elapsed()))
}

fn eq1_hand_cases() -> Outcome {
    use ActionLabel::{General as G, Specific as S};
    use GeneralAction::*;
    let a = SampleScore::new("a", vec![G(Share)], vec![G(Share), G(Save), G(LookUp)]).score;
    let b = SampleScore::new(
        "b",
        vec![S(SpecificAction::ShareWithOthers), S(SpecificAction::SaveForReference)],
        vec![S(SpecificAction::SearchOnline), S(SpecificAction::Remember), S(SpecificAction::Recognize)],
    )
    .score;
    let c = SampleScore::new("c", vec![G(Share), G(Save), G(LookUp), G(Remind)], vec![G(Share), G(Save), G(Complex)]).score;
    let one = SampleScore::new("d1", vec![G(Share)], vec![G(Share)]);
    let half = SampleScore::new("d2", vec![G(Share), G(Save)], vec![G(Share), G(Complex)]);
    check(one.score == 1.0 && half.score == 0.5, "averaging inputs should score 1 and 0.5")?;
    let d = full_match_accuracy(&[one, half]).map_err(|e| e.to_string())?;
    check(a == 1.0 && b == 0.0 && c == 2.0 / 3.0 && d == 0.75, format!("got {a}, {b}, {c}, {d}"))?;
    Ok(format!("{a}, {b}, {c:.6}, {d}"))
}

fn taxonomy_integrity() -> Outcome {
    check(GeneralAction::ALL.len() == 7, "7 general actions")?;
    check(SpecificAction::ALL.len() == 17, "17 specific actions")?;
    for g in GeneralAction::ALL {
        let children: Vec<_> = SpecificAction::ALL.iter().filter(|s| s.general() == g).collect();
        check(!children.is_empty(), format!("{g:?} has no children"))?;
    }
    let specific = action_system_prompt(Level::Specific, 3);
    let general = action_system_prompt(Level::General, 3);
    let cot = cot_system_prompt();
    for s in SpecificAction::ALL {
        check(specific.contains(&s.definition_line()), format!("{s:?} missing from specific prompt"))?;
        check(cot.contains(&s.definition_line()), format!("{s:?} missing from CoT prompt"))?;
        check(general.contains(&s.grouped_definition_line()), format!("{s:?} missing from general prompt"))?;
    }
    for m in TargetModality::ALL {
        let prompt = target_system_prompt(m.family());
        check(prompt.contains(m.description()), format!("{m:?} definition missing"))?;
    }
    let snapshots = [
        ("action_specific_n3.txt", specific),
        ("action_general_n3.txt", general),
        ("cot_generation.txt", cot),
        ("target_visual.txt", target_system_prompt(Family::Visual)),
        ("target_audio.txt", target_system_prompt(Family::Audio)),
    ];
    for (name, text) in snapshots {
        let frozen = std::fs::read_to_string(fixture(&format!("snapshots/{name}"))).map_err(|e| e.to_string())?;
        check(frozen == text, format!("prompt differs from snapshot {name}"))?;
    }
    Ok("7 general, 17 specific, single parents, all definitions verbatim, 5 prompt snapshots".into())
}

fn dominant_fidelity() -> Outcome {
    let stats = compute_stats(&reference_corpus()).map_err(|e| e.to_string())?;
    let names = |l: Vec<ActionLabel>| l.iter().map(|x| x.canonical_name()).collect::<Vec<_>>();
    let general = names(dominant_baseline(&stats, Level::General, 3));
    let specific = names(dominant_baseline(&stats, Level::Specific, 3));
    check(general == ["Save", "Share", "LookUp"], format!("general {general:?}"))?;
    check(specific == ["ShareWithOthers", "SaveForReference", "SearchOnline"], format!("specific {specific:?}"))?;
    let top1 = names(dominant_baseline(&stats, Level::General, 1));
    check(top1 == ["Save"], format!("general top-1 {top1:?}"))?;
    Ok(format!("general {general:?}, specific {specific:?}"))
}

fn oracle_end_to_end() -> Outcome {
    let start = Instant::now();
    let corpus = sample_corpus();
    let oracle = MockBackend::oracle(&corpus).map_err(|e| e.to_string())?;
    let mut runs = 0;
    for level in [Level::General, Level::Specific] {
        for top_n in 1..=3 {
            let config = EvalConfig { technique: Technique::Oracle, level, top_n, ..Default::default() };
            let r = eval_actions(&config, &corpus, &oracle).map_err(|e| e.to_string())?;
            check(r.accuracy == Some(1.0), format!("{level} top-{top_n}: {:?}", r.accuracy))?;
            check(r.parse_failures == 0 && r.backend_errors == 0, format!("{level} top-{top_n}: failures"))?;
            runs += 1;
        }
    }
    within(start.elapsed(), Duration::from_secs(10))?;
    Ok(format!("{runs} runs at 1.0, zero parse failures, {:?}", start.elapsed()))
}

fn deterministic_pipeline() -> Outcome {
    let corpus = sample_corpus();
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let table = RuleTable::load(fixture("mock_rules.toml")).map_err(|e| e.to_string())?;
    let inner: Arc<dyn Backend> = Arc::new(MockBackend::rules(table));
    let config = EvalConfig { technique: Technique::Icl, split_seed: 7, ..Default::default() };
    let first = CachedBackend::new(inner.clone(), ResponseCache::disk(dir.path()).map_err(|e| e.to_string())?);
    let a = eval_actions(&config, &corpus, &first).map_err(|e| e.to_string())?.to_json();
    let second = CachedBackend::new(inner, ResponseCache::disk(dir.path()).map_err(|e| e.to_string())?);
    let b = eval_actions(&config, &corpus, &second).map_err(|e| e.to_string())?.to_json();
    check(a == b, "reports differ")?;
    check(second.requests_issued() == 0, format!("second run issued {} requests", second.requests_issued()))?;
    Ok(format!(
        "{} byte reports identical; first run {} requests, second run 0",
        a.len(),
        first.requests_issued()
    ))
}

fn generator_distribution() -> Outcome {
    let start = Instant::now();
    let corpus = generate_synthetic(SynthConfig { seed: 2024, n: 10_000 });
    let stats = compute_stats(&corpus).map_err(|e| e.to_string())?;
    let n = corpus.len() as f64;
    let mut worst: f64 = 0.0;
    for (k, expected) in [(1usize, 183.0), (2, 147.0), (3, 44.0), (4, 8.0)] {
        let got = stats.action_count_histogram[&k] as f64 / n;
        let diff = (got - expected / 382.0).abs();
        worst = worst.max(diff);
        check(diff <= 0.03, format!("{k} actions: {got:.4} vs {:.4}", expected / 382.0))?;
    }
    for (m, expected) in TargetModality::ALL.iter().zip([55.0, 120.0, 79.0, 77.0, 51.0]) {
        let got = stats.target_counts[m] as f64 / n;
        let diff = (got - expected / 382.0).abs();
        worst = worst.max(diff);
        check(diff <= 0.03, format!("target {m}: {got:.4} vs {:.4}", expected / 382.0))?;
    }
    let ratio = stats.visual_audio_ratio.ok_or("no audio-only entries")?;
    check((ratio - 2.0).abs() <= 0.1, format!("visual:audio {ratio:.3}"))?;
    within(start.elapsed(), Duration::from_secs(30))?;
    Ok(format!("max proportion error {worst:.4}, visual:audio {ratio:.3}, {:?}", start.elapsed()))
}

fn parser_robustness() -> Outcome {
    let cases = common::parser_cases();
    let failed: Vec<&String> = cases.iter().filter(|(_, ok, _)| !ok).map(|(n, _, _)| n).collect();
    check(cases.len() >= 20, format!("only {} fixture cases", cases.len()))?;
    check(failed.is_empty(), format!("fixture cases failed: {failed:?}"))?;
    let mut rng = ChaCha8Rng::seed_from_u64(10_000);
    let purposes = [Purpose::ActionGeneral, Purpose::ActionSpecific, Purpose::TargetVisual, Purpose::TargetAudio];
    for i in 0..10_000 {
        let len = rng.random_range(0..200);
        let mut bytes: Vec<u8> = (0..len).map(|_| rng.random()).collect();
        // Bias a share of inputs towards JSON-looking text.
        if i % 4 == 0 {
            bytes.splice(0..0, br#"[{"prediction":""#.iter().copied());
        }
        let text = String::from_utf8_lossy(&bytes);
        let purpose = purposes[i % purposes.len()];
        let result = std::panic::catch_unwind(|| parse_prediction(&text, purpose, 3));
        check(result.is_ok(), format!("parser panicked on input {i}"))?;
    }
    Ok(format!("{} fixture cases match, 10000 random inputs without panic", cases.len()))
}

fn confusion_rule() -> Outcome {
    use ActionLabel::General as G;
    use GeneralAction::*;
    let m = confusion(&[SampleScore::new("a", vec![G(Share)], vec![G(Share), G(Save), G(LookUp)])], Level::General);
    let total: f64 = m.counts.iter().flatten().sum();
    check(m.cell(G(Share), G(Share)) == 1.0 && total == 1.0, "example 1")?;
    let m = confusion(
        &[SampleScore::new("b", vec![G(Share), G(Save)], vec![G(Share), G(LookUp), G(Remind)])],
        Level::General,
    );
    let total: f64 = m.counts.iter().flatten().sum();
    check(
        m.cell(G(Share), G(Share)) == 1.0
            && m.cell(G(Save), G(LookUp)) == 0.5
            && m.cell(G(Save), G(Remind)) == 0.5
            && total == 2.0,
        "example 2",
    )?;
    let m = confusion(&[SampleScore::failed("c", vec![G(Remind)], "no json")], Level::General);
    check(m.cell(G(Remind), G(Remind)) == 0.0 && m.counts.iter().flatten().sum::<f64>() == 0.0, "example 3")?;

    let mut rng = ChaCha8Rng::seed_from_u64(50);
    let samples: Vec<SampleScore<ActionLabel>> = (0..50)
        .map(|i| {
            let mut g = Vec::new();
            let k = rng.random_range(1..=4);
            while g.len() < k {
                let l = G(GeneralAction::ALL[rng.random_range(0..7)]);
                if !g.contains(&l) {
                    g.push(l);
                }
            }
            let p: Vec<ActionLabel> = (0..3).map(|_| G(GeneralAction::ALL[rng.random_range(0..7)])).collect();
            SampleScore::new(i.to_string(), g, p)
        })
        .collect();
    let m = confusion(&samples, Level::General);
    for g in GeneralAction::ALL {
        let mut tally = 0;
        for s in &samples {
            if s.truth.contains(&G(g)) && s.predicted.contains(&G(g)) {
                tally += 1;
            }
        }
        check(m.cell(G(g), G(g)) == tally as f64, format!("diagonal {g:?}"))?;
    }
    Ok("three worked examples exact; 50-sample diagonal equals true-and-predicted tallies".into())
}

fn ablation_shape() -> Outcome {
    let corpus = load_corpus(fixture("ablation_activity.jsonl")).map_err(|e| e.to_string())?;
    let table = RuleTable::load(fixture("ablation_rules.toml")).map_err(|e| e.to_string())?;
    let backend = MockBackend::rules(table);
    let config = EvalConfig { technique: Technique::Finetuned, top_n: 1, ..Default::default() };
    let report = ablation_grid(&config, &corpus, &backend).map_err(|e| e.to_string())?;
    let grid = report.ablation.ok_or("no grid")?;
    let mut cells = 0;
    for f in ModalityFilter::ROWS {
        for v in ContextVariant::ALL {
            check(grid.get(f, v).is_some(), format!("missing cell {f:?} x {v:?}"))?;
            cells += 1;
        }
    }
    let none = grid.get(ModalityFilter::All, ContextVariant::NoContext).unwrap_or(f64::NAN);
    let full = grid.get(ModalityFilter::All, ContextVariant::Full).unwrap_or(f64::NAN);
    check(full >= none, format!("full {full} < none {none}"))?;
    Ok(format!("{cells} cells; all-modality none {none:.3} -> full {full:.3}"))
}

fn export_round_trip() -> Outcome {
    let corpus = sample_corpus();
    let mut lines = 0;
    for level in [Level::General, Level::Specific] {
        let chat = export_finetune_chat(&corpus, level).map_err(|e| e.to_string())?;
        check(read_chat_jsonl(&to_jsonl(&chat)).map_err(|e| e.to_string())? == chat, "chat export changed")?;
        let legacy = export_finetune_legacy(&corpus, LegacyTask::Action(level)).map_err(|e| e.to_string())?;
        let expected: usize = corpus.iter().map(|e| e.labels.as_ref().map_or(0, |l| l.actions(level).len())).sum();
        check(legacy.len() == expected, format!("{} legacy lines, expected {expected}", legacy.len()))?;
        check(read_legacy_jsonl(&to_jsonl(&legacy)).map_err(|e| e.to_string())? == legacy, "legacy export changed")?;
        lines += legacy.len();
    }
    Ok(format!("chat and legacy exports re-parse identically; {lines} legacy lines equal label counts"))
}

#[test]
fn acceptance() {
    let criteria: [Criterion; 11] = [
        ("metric oracle equivalence", metric_oracle_equivalence),
        ("full-match hand cases", eq1_hand_cases),
        ("taxonomy integrity", taxonomy_integrity),
        ("dominant baseline fidelity", dominant_fidelity),
        ("oracle end-to-end", oracle_end_to_end),
        ("deterministic pipeline", deterministic_pipeline),
        ("generator distribution", generator_distribution),
        ("parser robustness", parser_robustness),
        ("confusion-matrix rule", confusion_rule),
        ("ablation grid shape", ablation_shape),
        ("export round-trip", export_round_trip),
    ];
    let mut failures = Vec::new();
    for (name, run) in criteria {
        match run() {
            Ok(detail) => println!("PASS  {name}: {detail}"),
            Err(reason) => {
                println!("FAIL  {name}: {reason}");
                failures.push(name);
            }
        }
    }
    assert!(failures.is_empty(), "failed criteria: {failures:?}");
}
