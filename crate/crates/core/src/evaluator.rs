//! Full-match accuracy, baselines, confusion matrices, context ablation and
//! per-action-count breakdowns.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backend::{run_bounded, Backend};
use crate::corpus::{compute_stats, ContextVariant, CorpusError, CorpusStats, DiaryEntry};
use crate::parser::{parse_prediction, PredictedLabel};
use crate::prompt::{
    build_action_prompt, build_target_prompt, select_fewshots_actions, select_fewshots_target,
    FewShotStore, PromptError, Purpose,
};
use crate::taxonomy::{ActionLabel, Family, GeneralAction, Level, SpecificAction, TargetModality, TaxonomyLabel};

pub mod reference;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("nothing to evaluate")]
    EmptyEvaluation,
    #[error("corpus has {0} entries; at least 4 are needed to split")]
    CorpusTooSmall(usize),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Prompt(#[from] PromptError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Technique {
    Icl,
    Finetuned,
    Classifier,
    Dominant,
    Oracle,
}

impl std::str::FromStr for Technique {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "icl" => Ok(Technique::Icl),
            "finetuned" | "fine-tuned" | "finetune" => Ok(Technique::Finetuned),
            "classifier" | "intent" => Ok(Technique::Classifier),
            "dominant" => Ok(Technique::Dominant),
            "oracle" => Ok(Technique::Oracle),
            _ => Err(format!("unknown technique {s:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModalityFilter {
    All,
    VisualOnly,
    AudioOnly,
}

impl ModalityFilter {
    /// Table row order: audio only, visual only, all.
    pub const ROWS: [ModalityFilter; 3] = [ModalityFilter::AudioOnly, ModalityFilter::VisualOnly, ModalityFilter::All];

    pub fn admits(self, entry: &DiaryEntry) -> bool {
        match self {
            ModalityFilter::All => true,
            ModalityFilter::VisualOnly => entry.kind() == Family::Visual,
            ModalityFilter::AudioOnly => entry.kind() == Family::Audio,
        }
    }

    pub fn display(self) -> &'static str {
        match self {
            ModalityFilter::All => "All",
            ModalityFilter::VisualOnly => "Visual only",
            ModalityFilter::AudioOnly => "Audio only",
        }
    }
}

impl std::str::FromStr for ModalityFilter {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "all" => Ok(ModalityFilter::All),
            "visual_only" | "visual" => Ok(ModalityFilter::VisualOnly),
            "audio_only" | "audio" => Ok(ModalityFilter::AudioOnly),
            _ => Err(format!("unknown modality filter {s:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalConfig {
    pub technique: Technique,
    pub level: Level,
    pub top_n: usize,
    pub context_variant: ContextVariant,
    pub modality_filter: ModalityFilter,
    pub split_seed: u64,
    pub split_ratio: f64,
    /// Keep the visual/audio proportion equal in train and test.
    #[serde(default)]
    pub stratified: bool,
    /// For icl: draw exemplars from the whole corpus and test on the rest
    /// instead of using the ratio split.
    #[serde(default)]
    pub holdout_fewshots_only: bool,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            technique: Technique::Icl,
            level: Level::Specific,
            top_n: 3,
            context_variant: ContextVariant::Full,
            modality_filter: ModalityFilter::All,
            split_seed: 7,
            split_ratio: 0.75,
            stratified: false,
            holdout_fewshots_only: false,
        }
    }
}

impl EvalConfig {
    pub fn validate(&self) -> Result<(), EvalError> {
        if !(1..=3).contains(&self.top_n) {
            return Err(EvalError::InvalidConfig(format!("top_n must be 1, 2 or 3, got {}", self.top_n)));
        }
        if !(self.split_ratio > 0.0 && self.split_ratio < 1.0) {
            return Err(EvalError::InvalidConfig(format!("split_ratio must lie in (0, 1), got {}", self.split_ratio)));
        }
        Ok(())
    }
}

/// One scored test entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleScore<L> {
    pub entry_id: String,
    pub truth: Vec<L>,
    pub predicted: Vec<L>,
    pub correct: usize,
    pub score: f64,
    pub parse_failed: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl<L: Copy + PartialEq> SampleScore<L> {
    /// `correct / min(|truth|, |predicted|)`; zero when nothing was predicted.
    pub fn new(entry_id: impl Into<String>, truth: Vec<L>, predicted: Vec<L>) -> Self {
        let mut p: Vec<L> = Vec::with_capacity(predicted.len());
        for l in predicted {
            if !p.contains(&l) {
                p.push(l);
            }
        }
        let correct = p.iter().filter(|l| truth.contains(l)).count();
        let denom = truth.len().min(p.len());
        let score = if denom == 0 { 0.0 } else { correct as f64 / denom as f64 };
        SampleScore { entry_id: entry_id.into(), parse_failed: p.is_empty(), truth, predicted: p, correct, score, error: None }
    }

    pub fn failed(entry_id: impl Into<String>, truth: Vec<L>, error: impl Into<String>) -> Self {
        SampleScore {
            entry_id: entry_id.into(),
            truth,
            predicted: Vec::new(),
            correct: 0,
            score: 0.0,
            parse_failed: true,
            error: Some(error.into()),
        }
    }

    pub fn map<M>(&self, f: impl Fn(L) -> M) -> SampleScore<M> {
        SampleScore {
            entry_id: self.entry_id.clone(),
            truth: self.truth.iter().map(|&l| f(l)).collect(),
            predicted: self.predicted.iter().map(|&l| f(l)).collect(),
            correct: self.correct,
            score: self.score,
            parse_failed: self.parse_failed,
            error: self.error.clone(),
        }
    }
}

/// Sample average of per-entry scores.
pub fn full_match_accuracy<L>(scores: &[SampleScore<L>]) -> Result<f64, EvalError> {
    if scores.is_empty() {
        return Err(EvalError::EmptyEvaluation);
    }
    Ok(scores.iter().map(|s| s.score).sum::<f64>() / scores.len() as f64)
}

fn mean_or_none<L>(scores: &[&SampleScore<L>]) -> Option<f64> {
    (!scores.is_empty()).then(|| scores.iter().map(|s| s.score).sum::<f64>() / scores.len() as f64)
}

/// Seeded shuffle, then the first `round(n * ratio)` entries train.
pub fn split(corpus: &[DiaryEntry], seed: u64, ratio: f64) -> Result<(Vec<DiaryEntry>, Vec<DiaryEntry>), EvalError> {
    if corpus.len() < 4 {
        return Err(EvalError::CorpusTooSmall(corpus.len()));
    }
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(EvalError::InvalidConfig(format!("split_ratio must lie in (0, 1), got {ratio}")));
    }
    let mut idx: Vec<usize> = (0..corpus.len()).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_train = ((corpus.len() as f64 * ratio).round() as usize).clamp(1, corpus.len() - 1);
    let train = idx[..n_train].iter().map(|&i| corpus[i].clone()).collect();
    let test = idx[n_train..].iter().map(|&i| corpus[i].clone()).collect();
    Ok((train, test))
}

/// Like [`split`] but applied separately to visual and audio-only entries.
pub fn split_stratified(
    corpus: &[DiaryEntry],
    seed: u64,
    ratio: f64,
) -> Result<(Vec<DiaryEntry>, Vec<DiaryEntry>), EvalError> {
    if corpus.len() < 4 {
        return Err(EvalError::CorpusTooSmall(corpus.len()));
    }
    let mut train = Vec::new();
    let mut test = Vec::new();
    for (k, family) in [Family::Visual, Family::Audio].into_iter().enumerate() {
        let mut part: Vec<&DiaryEntry> = corpus.iter().filter(|e| e.kind() == family).collect();
        part.shuffle(&mut ChaCha8Rng::seed_from_u64(seed.wrapping_add(k as u64)));
        let n_train = (part.len() as f64 * ratio).round() as usize;
        train.extend(part[..n_train].iter().map(|&e| e.clone()));
        test.extend(part[n_train..].iter().map(|&e| e.clone()));
    }
    if train.is_empty() || test.is_empty() {
        return Err(EvalError::CorpusTooSmall(corpus.len()));
    }
    Ok((train, test))
}

/// Top-`n` labels of the training statistics, ties by canonical order.
pub fn dominant_baseline(train_stats: &CorpusStats, level: Level, n: usize) -> Vec<ActionLabel> {
    train_stats.top_actions(level, n)
}

fn level_labels(level: Level) -> Vec<ActionLabel> {
    match level {
        Level::General => GeneralAction::ALL.into_iter().map(ActionLabel::General).collect(),
        Level::Specific => SpecificAction::ALL.into_iter().map(ActionLabel::Specific).collect(),
    }
}

fn action_index(label: ActionLabel) -> usize {
    match label {
        ActionLabel::General(g) => g.index(),
        ActionLabel::Specific(s) => s.index(),
    }
}

/// Confusion counts with fractional error attribution, row-normalized by
/// ground-truth appearance counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub level: Level,
    pub labels: Vec<String>,
    pub counts: Vec<Vec<f64>>,
    pub appearances: Vec<usize>,
    pub normalized: Vec<Vec<f64>>,
}

impl ConfusionMatrix {
    pub fn cell(&self, truth: ActionLabel, predicted: ActionLabel) -> f64 {
        self.counts[action_index(truth)][action_index(predicted)]
    }

    pub fn normalized_cell(&self, truth: ActionLabel, predicted: ActionLabel) -> f64 {
        self.normalized[action_index(truth)][action_index(predicted)]
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("truth\\predicted");
        for l in &self.labels {
            out.push(',');
            out.push_str(l);
        }
        out.push('\n');
        for (i, row) in self.normalized.iter().enumerate() {
            out.push_str(&self.labels[i]);
            for v in row {
                let _ = write!(out, ",{v:.4}");
            }
            out.push('\n');
        }
        out
    }
}

/// Per sample: every correctly predicted label adds 1 on its diagonal. Only
/// when some true label was missed, each missed label spreads 1 across the
/// spurious predictions (`1 / |P \ G|` each).
pub fn confusion(samples: &[SampleScore<ActionLabel>], level: Level) -> ConfusionMatrix {
    let labels = level_labels(level);
    let k = labels.len();
    let mut counts = vec![vec![0.0; k]; k];
    let mut appearances = vec![0usize; k];
    for s in samples {
        for &g in &s.truth {
            if g.level() != level {
                continue;
            }
            appearances[action_index(g)] += 1;
            if s.predicted.contains(&g) {
                counts[action_index(g)][action_index(g)] += 1.0;
            }
        }
        let missed: Vec<ActionLabel> = s.truth.iter().copied().filter(|g| !s.predicted.contains(g)).collect();
        let spurious: Vec<ActionLabel> = s.predicted.iter().copied().filter(|p| !s.truth.contains(p)).collect();
        if missed.is_empty() || spurious.is_empty() {
            continue;
        }
        let share = 1.0 / spurious.len() as f64;
        for &g in &missed {
            for &p in &spurious {
                counts[action_index(g)][action_index(p)] += share;
            }
        }
    }
    let normalized = counts
        .iter()
        .zip(&appearances)
        .map(|(row, &n)| row.iter().map(|&c| if n == 0 { 0.0 } else { c / n as f64 }).collect())
        .collect();
    ConfusionMatrix {
        level,
        labels: labels.iter().map(|l| l.canonical_name().to_string()).collect(),
        counts,
        appearances,
        normalized,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bucket {
    pub samples: usize,
    pub accuracy: f64,
}

/// Accuracy by number of ground-truth labels. `multi` pools every sample
/// with two or more labels; `None` marks an empty bucket.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionCountBreakdown {
    pub by_count: BTreeMap<usize, Option<Bucket>>,
    pub multi: Option<Bucket>,
    pub all: Option<Bucket>,
}

impl ActionCountBreakdown {
    pub fn accuracy(&self, count: usize) -> Option<f64> {
        self.by_count.get(&count).copied().flatten().map(|b| b.accuracy)
    }
}

fn bucket<L>(samples: &[&SampleScore<L>]) -> Option<Bucket> {
    mean_or_none(samples).map(|accuracy| Bucket { samples: samples.len(), accuracy })
}

pub fn breakdown_by_action_count<L>(samples: &[SampleScore<L>]) -> ActionCountBreakdown {
    let by_count = (1..=crate::corpus::MAX_ACTIONS)
        .map(|k| {
            let in_bucket: Vec<&SampleScore<L>> = samples.iter().filter(|s| s.truth.len() == k).collect();
            (k, bucket(&in_bucket))
        })
        .collect();
    let multi: Vec<&SampleScore<L>> = samples.iter().filter(|s| s.truth.len() >= 2).collect();
    let all: Vec<&SampleScore<L>> = samples.iter().collect();
    ActionCountBreakdown { by_count, multi: bucket(&multi), all: bucket(&all) }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ModalityAccuracy {
    pub visual: Option<f64>,
    pub audio: Option<f64>,
}

/// Table-4 style grid: rows audio only / visual only / all, columns the
/// four context variants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationGrid {
    pub level: Level,
    pub top_n: usize,
    pub cells: BTreeMap<ModalityFilter, BTreeMap<ContextVariant, Option<f64>>>,
}

impl AblationGrid {
    pub fn get(&self, filter: ModalityFilter, variant: ContextVariant) -> Option<f64> {
        self.cells.get(&filter).and_then(|row| row.get(&variant)).copied().flatten()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportKind {
    Actions,
    Target,
    Ablation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub kind: ReportKind,
    pub config: EvalConfig,
    pub model: String,
    /// Oracle runs check plumbing only; their numbers carry no signal.
    pub oracle: bool,
    pub train_size: usize,
    pub test_size: usize,
    /// Pooled accuracy; absent for target reports, which never pool.
    pub accuracy: Option<f64>,
    pub modality_accuracy: ModalityAccuracy,
    pub parse_failures: usize,
    pub backend_errors: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ablation: Option<AblationGrid>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub confusion: Option<ConfusionMatrix>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub action_count: Option<ActionCountBreakdown>,
    pub samples: Vec<SampleScore<String>>,
    pub reference: reference::ReferenceBlock,
}

impl EvalReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports serialize")
    }

    /// Plain-text rendering with reference numbers side by side.
    pub fn render_text(&self) -> String {
        let pct = |v: Option<f64>| v.map_or("   -  ".to_string(), |v| format!("{:6.1}", v * 100.0));
        let mut out = String::new();
        let c = &self.config;
        let _ = writeln!(
            out,
            "{:?} evaluation | technique {:?} | model {} | level {} | top-{} | context {} | filter {}",
            self.kind,
            c.technique,
            self.model,
            c.level,
            c.top_n,
            c.context_variant.as_str(),
            c.modality_filter.display()
        );
        if self.oracle {
            out.push_str("ORACLE RUN: ground-truth answers, plumbing check only\n");
        }
        let _ = writeln!(out, "train {} | test {} | parse failures {} | backend errors {}", self.train_size, self.test_size, self.parse_failures, self.backend_errors);
        if let Some(a) = self.accuracy {
            let _ = writeln!(out, "accuracy {}%", pct(Some(a)).trim());
        }
        let _ = writeln!(
            out,
            "visual {}% | audio {}%",
            pct(self.modality_accuracy.visual).trim(),
            pct(self.modality_accuracy.audio).trim()
        );
        if let Some(grid) = &self.ablation {
            out.push_str("\ncontext ablation (accuracy %)\n");
            let _ = writeln!(out, "{:<12} {:>8} {:>8} {:>8} {:>8}", "", "none", "location", "activity", "full");
            for f in ModalityFilter::ROWS {
                let _ = write!(out, "{:<12}", f.display());
                for v in ContextVariant::ALL {
                    let _ = write!(out, " {:>8}", pct(grid.get(f, v)).trim());
                }
                out.push('\n');
            }
        }
        if let Some(b) = &self.action_count {
            out.push_str("\naccuracy by ground-truth action count (%)\n");
            for (k, v) in &b.by_count {
                let _ = writeln!(out, "{k:<4} {:>6} (n={})", pct(v.map(|b| b.accuracy)).trim(), v.map_or(0, |b| b.samples));
            }
            let _ = writeln!(out, "2+   {:>6} (n={})", pct(b.multi.map(|b| b.accuracy)).trim(), b.multi.map_or(0, |b| b.samples));
            let _ = writeln!(out, "all  {:>6} (n={})", pct(b.all.map(|b| b.accuracy)).trim(), b.all.map_or(0, |b| b.samples));
        }
        out.push('\n');
        out.push_str(&self.reference.render(self.kind, c.level));
        out
    }
}

/// Side-by-side accuracy of two reports and the difference.
pub fn compare_reports(base: &EvalReport, other: &EvalReport) -> String {
    let row = |name: &str, a: Option<f64>, b: Option<f64>| match (a, b) {
        (Some(a), Some(b)) => format!("{name:<8} {:6.1} {:6.1} {:+6.1}\n", a * 100.0, b * 100.0, (b - a) * 100.0),
        _ => format!("{name:<8}      -      -      -\n"),
    };
    let mut out = format!("{:<8} {:>6} {:>6} {:>6}\n", "", "base", "other", "delta");
    out.push_str(&row("all", base.accuracy, other.accuracy));
    out.push_str(&row("visual", base.modality_accuracy.visual, other.modality_accuracy.visual));
    out.push_str(&row("audio", base.modality_accuracy.audio, other.modality_accuracy.audio));
    out
}

struct Prepared {
    train: Vec<DiaryEntry>,
    test: Vec<DiaryEntry>,
}

fn prepare(config: &EvalConfig, corpus: &[DiaryEntry]) -> Result<Prepared, EvalError> {
    config.validate()?;
    for e in corpus {
        e.labels()?;
    }
    if config.technique == Technique::Icl && config.holdout_fewshots_only {
        if corpus.len() < 4 {
            return Err(EvalError::CorpusTooSmall(corpus.len()));
        }
        let store = select_fewshots_actions(corpus).store;
        let test = corpus.iter().filter(|e| !store.contains(&e.id)).cloned().collect();
        return Ok(Prepared { train: store.entries, test });
    }
    let (train, test) = if config.stratified {
        split_stratified(corpus, config.split_seed, config.split_ratio)?
    } else {
        split(corpus, config.split_seed, config.split_ratio)?
    };
    Ok(Prepared { train, test })
}

fn action_truth(e: &DiaryEntry, level: Level) -> Vec<ActionLabel> {
    e.labels.as_ref().expect("validated").actions(level)
}

/// Predicts actions for `test`, in input order.
fn predict_actions(
    config: &EvalConfig,
    variant: ContextVariant,
    train: &[DiaryEntry],
    test: &[DiaryEntry],
    backend: &dyn Backend,
) -> Result<Vec<SampleScore<ActionLabel>>, EvalError> {
    let level = config.level;
    let n = config.top_n;
    let purpose = Purpose::for_level(level);
    let fewshots: Option<FewShotStore> = match config.technique {
        Technique::Icl => Some(select_fewshots_actions(train).store),
        _ => None,
    };
    if fewshots.as_ref().is_some_and(|s| s.is_empty()) {
        return Err(EvalError::Prompt(PromptError::EmptyFewShots));
    }
    if config.technique == Technique::Dominant {
        let stats = compute_stats(train)?;
        let predicted = dominant_baseline(&stats, level, n);
        return Ok(test.iter().map(|e| SampleScore::new(e.id.clone(), action_truth(e, level), predicted.clone())).collect());
    }
    let bundles = test
        .iter()
        .map(|e| build_action_prompt(e, level, n, fewshots.as_ref(), variant))
        .collect::<Result<Vec<_>, _>>()?;
    let technique = config.technique;
    Ok(run_bounded(test, backend.max_in_flight(), |i, e| {
        let truth = action_truth(e, level);
        if technique == Technique::Classifier {
            return match backend.classify(&e.tuple(variant), purpose, n) {
                Ok(ranked) => {
                    let predicted = ranked
                        .names()
                        .into_iter()
                        .filter_map(|name| crate::backend::resolve_label(name, purpose))
                        .filter_map(PredictedLabel::as_action)
                        .collect();
                    SampleScore::new(e.id.clone(), truth, predicted)
                }
                Err(err) => SampleScore::failed(e.id.clone(), truth, err.to_string()),
            };
        }
        match backend.chat(&bundles[i]) {
            Ok(raw) => match parse_prediction(&raw, purpose, n) {
                Ok(set) => SampleScore::new(e.id.clone(), truth, set.action_labels()),
                Err(err) => SampleScore::failed(e.id.clone(), truth, err.to_string()),
            },
            Err(err) => SampleScore::failed(e.id.clone(), truth, format!("backend: {err}")),
        }
    }))
}

fn tally<L>(samples: &[SampleScore<L>]) -> (usize, usize) {
    let backend_errors = samples
        .iter()
        .filter(|s| s.error.as_deref().is_some_and(|e| e.starts_with("backend:")))
        .count();
    let parse_failures = samples.iter().filter(|s| s.parse_failed).count() - backend_errors;
    (parse_failures, backend_errors)
}

fn by_family<'a, L>(samples: &'a [SampleScore<L>], test: &[DiaryEntry], family: Family) -> Vec<&'a SampleScore<L>> {
    samples.iter().zip(test).filter(|(_, e)| e.kind() == family).map(|(s, _)| s).collect()
}

/// Scores follow-up action predictions on the test split.
pub fn eval_actions(config: &EvalConfig, corpus: &[DiaryEntry], backend: &dyn Backend) -> Result<EvalReport, EvalError> {
    let Prepared { train, test } = prepare(config, corpus)?;
    let test: Vec<DiaryEntry> = test.into_iter().filter(|e| config.modality_filter.admits(e)).collect();
    if test.is_empty() {
        return Err(EvalError::EmptyEvaluation);
    }
    let samples = predict_actions(config, config.context_variant, &train, &test, backend)?;
    let (parse_failures, backend_errors) = tally(&samples);
    Ok(EvalReport {
        kind: ReportKind::Actions,
        config: config.clone(),
        model: model_label(config, backend),
        oracle: config.technique == Technique::Oracle,
        train_size: train.len(),
        test_size: test.len(),
        accuracy: Some(full_match_accuracy(&samples)?),
        modality_accuracy: ModalityAccuracy {
            visual: mean_or_none(&by_family(&samples, &test, Family::Visual)),
            audio: mean_or_none(&by_family(&samples, &test, Family::Audio)),
        },
        parse_failures,
        backend_errors,
        ablation: None,
        confusion: Some(confusion(&samples, config.level)),
        action_count: Some(breakdown_by_action_count(&samples)),
        samples: samples.iter().map(|s| s.map(|l| l.canonical_name().to_string())).collect(),
        reference: reference::ReferenceBlock::default(),
    })
}

fn model_label(config: &EvalConfig, backend: &dyn Backend) -> String {
    match config.technique {
        Technique::Dominant => "dominant-frequency baseline".to_string(),
        _ => backend.model_name().to_string(),
    }
}

/// Runs the action evaluation under every context variant and reports the
/// accuracy of each modality subset. The split is shared by all cells.
pub fn ablation_grid(config: &EvalConfig, corpus: &[DiaryEntry], backend: &dyn Backend) -> Result<EvalReport, EvalError> {
    let Prepared { train, test } = prepare(config, corpus)?;
    if test.is_empty() {
        return Err(EvalError::EmptyEvaluation);
    }
    let mut cells: BTreeMap<ModalityFilter, BTreeMap<ContextVariant, Option<f64>>> = BTreeMap::new();
    let mut full_samples = Vec::new();
    for variant in ContextVariant::ALL {
        let samples = predict_actions(config, variant, &train, &test, backend)?;
        for f in ModalityFilter::ROWS {
            let subset: Vec<&SampleScore<ActionLabel>> =
                samples.iter().zip(&test).filter(|(_, e)| f.admits(e)).map(|(s, _)| s).collect();
            cells.entry(f).or_default().insert(variant, mean_or_none(&subset));
        }
        if variant == config.context_variant {
            full_samples = samples;
        }
    }
    let (parse_failures, backend_errors) = tally(&full_samples);
    Ok(EvalReport {
        kind: ReportKind::Ablation,
        config: config.clone(),
        model: model_label(config, backend),
        oracle: config.technique == Technique::Oracle,
        train_size: train.len(),
        test_size: test.len(),
        accuracy: full_match_accuracy(&full_samples).ok(),
        modality_accuracy: ModalityAccuracy {
            visual: mean_or_none(&by_family(&full_samples, &test, Family::Visual)),
            audio: mean_or_none(&by_family(&full_samples, &test, Family::Audio)),
        },
        parse_failures,
        backend_errors,
        ablation: Some(AblationGrid { level: config.level, top_n: config.top_n, cells }),
        confusion: None,
        action_count: None,
        samples: full_samples.iter().map(|s| s.map(|l| l.canonical_name().to_string())).collect(),
        reference: reference::ReferenceBlock::default(),
    })
}

/// Scores target-information predictions. The ground-truth target's family
/// selects the label space (three visual classes or two audio classes) and
/// the two families are reported separately.
pub fn eval_target(config: &EvalConfig, corpus: &[DiaryEntry], backend: &dyn Backend) -> Result<EvalReport, EvalError> {
    let Prepared { train, test } = prepare(config, corpus)?;
    let test: Vec<DiaryEntry> = test.into_iter().filter(|e| config.modality_filter.admits(e)).collect();
    if test.is_empty() {
        return Err(EvalError::EmptyEvaluation);
    }
    let fewshots = match config.technique {
        Technique::Icl => Some(select_fewshots_target(&train)?),
        _ => None,
    };
    let stats = compute_stats(&train)?;
    let technique = config.technique;
    let samples: Vec<SampleScore<TargetModality>> = run_bounded(&test, backend.max_in_flight(), |_, e| {
        let target = e.labels.as_ref().expect("validated").target;
        let family = target.family();
        let purpose = Purpose::for_family(family);
        let truth = vec![target];
        match technique {
            Technique::Dominant => SampleScore::new(e.id.clone(), truth, vec![stats.top_target(family)]),
            Technique::Classifier => match backend.classify(&e.tuple(ContextVariant::Full), purpose, 1) {
                Ok(ranked) => {
                    let predicted = ranked
                        .names()
                        .into_iter()
                        .filter_map(|n| crate::backend::resolve_label(n, purpose))
                        .filter_map(PredictedLabel::as_target)
                        .collect();
                    SampleScore::new(e.id.clone(), truth, predicted)
                }
                Err(err) => SampleScore::failed(e.id.clone(), truth, format!("backend: {err}")),
            },
            _ => {
                let bundle = match build_target_prompt(e, family, fewshots.as_ref()) {
                    Ok(b) => b,
                    Err(err) => return SampleScore::failed(e.id.clone(), truth, err.to_string()),
                };
                match backend.chat(&bundle) {
                    Ok(raw) => match parse_prediction(&raw, purpose, 1) {
                        Ok(set) => SampleScore::new(
                            e.id.clone(),
                            truth,
                            set.labels().into_iter().filter_map(PredictedLabel::as_target).collect(),
                        ),
                        Err(err) => SampleScore::failed(e.id.clone(), truth, err.to_string()),
                    },
                    Err(err) => SampleScore::failed(e.id.clone(), truth, format!("backend: {err}")),
                }
            }
        }
    });
    let family_scores = |f: Family| -> Vec<&SampleScore<TargetModality>> {
        samples.iter().filter(|s| s.truth[0].family() == f).collect()
    };
    let (parse_failures, backend_errors) = tally(&samples);
    Ok(EvalReport {
        kind: ReportKind::Target,
        config: config.clone(),
        model: model_label(config, backend),
        oracle: config.technique == Technique::Oracle,
        train_size: train.len(),
        test_size: test.len(),
        accuracy: None,
        modality_accuracy: ModalityAccuracy {
            visual: mean_or_none(&family_scores(Family::Visual)),
            audio: mean_or_none(&family_scores(Family::Audio)),
        },
        parse_failures,
        backend_errors,
        ablation: None,
        confusion: None,
        action_count: None,
        samples: samples.iter().map(|s| s.map(|l| l.canonical_name().to_string())).collect(),
        reference: reference::ReferenceBlock::default(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ActionLabel::General as G;
    use GeneralAction::*;

    #[test]
    fn eq1_examples() {
        assert_eq!(SampleScore::new("a", vec![G(Share)], vec![G(Share), G(Save), G(LookUp)]).score, 1.0);
        let s = SampleScore::new(
            "b",
            vec![ActionLabel::Specific(SpecificAction::ShareWithOthers), ActionLabel::Specific(SpecificAction::SaveForReference)],
            vec![
                ActionLabel::Specific(SpecificAction::SearchOnline),
                ActionLabel::Specific(SpecificAction::Remember),
                ActionLabel::Specific(SpecificAction::Recognize),
            ],
        );
        assert_eq!(s.score, 0.0);
        let s = SampleScore::new(
            "c",
            vec![G(Share), G(Save), G(LookUp), G(Remind)],
            vec![G(Share), G(Save), G(Complex)],
        );
        assert!((s.score - 2.0 / 3.0).abs() < 1e-12);
        let mut a = SampleScore::new("d", vec![G(Share)], vec![G(Share)]);
        let mut b = a.clone();
        a.score = 1.0;
        b.score = 0.5;
        assert_eq!(full_match_accuracy(&[a, b]).unwrap(), 0.75);
        assert!(matches!(full_match_accuracy::<ActionLabel>(&[]), Err(EvalError::EmptyEvaluation)));
    }

    #[test]
    fn confusion_examples() {
        let m = confusion(&[SampleScore::new("a", vec![G(Share)], vec![G(Share), G(Save), G(LookUp)])], Level::General);
        let total: f64 = m.counts.iter().flatten().sum();
        assert_eq!(m.cell(G(Share), G(Share)), 1.0);
        assert_eq!(total, 1.0);

        let m = confusion(
            &[SampleScore::new("b", vec![G(Share), G(Save)], vec![G(Share), G(LookUp), G(Remind)])],
            Level::General,
        );
        assert_eq!(m.cell(G(Share), G(Share)), 1.0);
        assert_eq!(m.cell(G(Save), G(LookUp)), 0.5);
        assert_eq!(m.cell(G(Save), G(Remind)), 0.5);

        let m = confusion(&[SampleScore::failed("c", vec![G(Remind)], "no json")], Level::General);
        assert_eq!(m.cell(G(Remind), G(Remind)), 0.0);
        assert_eq!(m.appearances[Remind.index()], 1);
    }

    #[test]
    fn split_is_deterministic_and_disjoint() {
        let corpus = crate::synth::generate_synthetic(crate::synth::SynthConfig { seed: 3, n: 100 });
        let (a, b) = split(&corpus, 9, 0.75).unwrap();
        assert_eq!((a.len(), b.len()), (75, 25));
        let (a2, _) = split(&corpus, 9, 0.75).unwrap();
        assert_eq!(a, a2);
        assert!(a.iter().all(|x| !b.iter().any(|y| y.id == x.id)));
        assert!(matches!(split(&corpus[..3], 1, 0.75), Err(EvalError::CorpusTooSmall(3))));
    }

    #[test]
    fn breakdown_single_label() {
        let samples: Vec<_> = (0..5).map(|i| SampleScore::new(format!("{i}"), vec![G(Save)], vec![G(Save)])).collect();
        let b = breakdown_by_action_count(&samples);
        assert_eq!(b.accuracy(1), Some(1.0));
        assert_eq!(b.accuracy(2), None);
        assert_eq!(b.multi, None);
    }

    #[test]
    fn config_validation() {
        let mut c = EvalConfig { top_n: 4, ..Default::default() };
        assert!(c.validate().is_err());
        c.top_n = 1;
        c.split_ratio = 1.0;
        assert!(c.validate().is_err());
    }
}
