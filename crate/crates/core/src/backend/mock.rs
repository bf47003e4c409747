//! Deterministic test double.
//!
//! Rule mode maps tuple content to labels through keyword conditions and
//! pads with a frequency-ordered fallback. Oracle mode answers with the
//! ground truth of the entry whose tuple it is asked about; it exists to
//! check evaluation plumbing end to end and is reported as such.

use std::collections::HashMap;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};

use serde::Deserialize;
use serde_json::Value;

use super::{label_space, rank_labels, Backend, BackendError, RankedLabels};
use crate::corpus::{ContextVariant, CorpusStats, DiaryEntry, Labels};
use crate::parser::PredictedLabel;
use crate::prompt::{render_answer, AnswerItem, PromptBundle, Purpose};
use crate::taxonomy::{
    normalize_label, ActionLabel, Family, GeneralAction, Level, SpecificAction, TargetModality,
};

/// One keyword condition. `field` names a tuple key (`scene_description`,
/// `objects`, `visible_text`, `sounds`, `speech`, `location`, `activity`) or
/// `any` for the whole tuple text. Matching is case-insensitive substring.
#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
pub struct Condition {
    #[serde(default = "any_field")]
    pub field: String,
    pub contains: String,
}

fn any_field() -> String {
    "any".to_string()
}

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Rule {
    #[serde(default)]
    pub name: String,
    /// All conditions must hold.
    #[serde(default)]
    pub when: Vec<Condition>,
    #[serde(default)]
    pub actions: Vec<String>,
    #[serde(default)]
    pub target: Option<String>,
    #[serde(default)]
    pub cot: Option<String>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FallbackSpec {
    #[serde(default)]
    general: Vec<String>,
    #[serde(default)]
    specific: Vec<String>,
    #[serde(default)]
    visual_target: Option<String>,
    #[serde(default)]
    audio_target: Option<String>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RuleFile {
    #[serde(default)]
    fallback: Option<FallbackSpec>,
    #[serde(default)]
    rules: Vec<Rule>,
}

#[derive(Debug, Clone)]
struct CompiledRule {
    name: String,
    when: Vec<(String, String)>,
    actions: Vec<SpecificAction>,
    target: Option<TargetModality>,
    cot: Option<String>,
}

/// Full label rankings used to pad rule output.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Fallback {
    pub general: Vec<GeneralAction>,
    pub specific: Vec<SpecificAction>,
    pub visual_target: TargetModality,
    pub audio_target: TargetModality,
}

impl Default for Fallback {
    /// Ordering of the diary-study label frequencies.
    fn default() -> Self {
        use GeneralAction as G;
        let visual = crate::synth::action_weights(Family::Visual);
        let audio = crate::synth::action_weights(Family::Audio);
        let mut specific: Vec<(SpecificAction, f64)> = SpecificAction::ALL
            .iter()
            .enumerate()
            .map(|(i, &s)| (s, visual[i] + audio[i]))
            .collect();
        specific.sort_by(|a, b| b.1.total_cmp(&a.1));
        Fallback {
            general: vec![
                G::Save,
                G::Share,
                G::LookUp,
                G::DigitalExtract,
                G::Remind,
                G::MediaManipulation,
                G::Complex,
            ],
            specific: specific.into_iter().map(|(s, _)| s).collect(),
            visual_target: TargetModality::Object,
            audio_target: TargetModality::Sound,
        }
    }
}

impl Fallback {
    /// Dominant-frequency ordering of a labeled corpus.
    pub fn from_stats(stats: &CorpusStats) -> Self {
        Fallback {
            general: stats.top_general(GeneralAction::ALL.len()),
            specific: stats.top_specific(SpecificAction::ALL.len()),
            visual_target: stats.top_target(Family::Visual),
            audio_target: stats.top_target(Family::Audio),
        }
    }

    pub fn actions(&self, level: Level) -> Vec<ActionLabel> {
        match level {
            Level::General => self.general.iter().copied().map(ActionLabel::General).collect(),
            Level::Specific => self.specific.iter().copied().map(ActionLabel::Specific).collect(),
        }
    }

    pub fn target(&self, family: Family) -> TargetModality {
        match family {
            Family::Visual => self.visual_target,
            Family::Audio => self.audio_target,
        }
    }

    fn apply(mut self, spec: &FallbackSpec) -> Result<Self, BackendError> {
        let mut general = Vec::new();
        for raw in &spec.general {
            match normalize_label(raw, Level::General) {
                Ok(ActionLabel::General(g)) if !general.contains(&g) => general.push(g),
                Ok(_) => {}
                Err(e) => return Err(BackendError::RuleParse(format!("fallback.general: {e}"))),
            }
        }
        general.extend(self.general.iter().filter(|g| !spec_contains(&general, g)).copied().collect::<Vec<_>>());
        let mut specific = Vec::new();
        for raw in &spec.specific {
            match normalize_label(raw, Level::Specific) {
                Ok(ActionLabel::Specific(s)) if !specific.contains(&s) => specific.push(s),
                Ok(_) => {}
                Err(e) => return Err(BackendError::RuleParse(format!("fallback.specific: {e}"))),
            }
        }
        specific.extend(self.specific.iter().filter(|s| !spec_contains(&specific, s)).copied().collect::<Vec<_>>());
        self.general = general;
        self.specific = specific;
        if let Some(t) = &spec.visual_target {
            self.visual_target = TargetModality::normalize_in(t, Family::Visual)
                .map_err(|e| BackendError::RuleParse(format!("fallback.visual_target: {e}")))?;
        }
        if let Some(t) = &spec.audio_target {
            self.audio_target = TargetModality::normalize_in(t, Family::Audio)
                .map_err(|e| BackendError::RuleParse(format!("fallback.audio_target: {e}")))?;
        }
        Ok(self)
    }
}

fn spec_contains<T: PartialEq>(v: &[T], x: &T) -> bool {
    v.contains(x)
}

/// Parsed keyword rules plus the fallback ranking.
#[derive(Debug, Clone)]
pub struct RuleTable {
    rules: Vec<CompiledRule>,
    fallback: Fallback,
    explicit_fallback: bool,
}

impl RuleTable {
    pub fn empty() -> Self {
        RuleTable { rules: Vec::new(), fallback: Fallback::default(), explicit_fallback: false }
    }

    /// Parses a TOML rule table (`[[rules]]` entries, optional `[fallback]`).
    pub fn from_toml(text: &str) -> Result<Self, BackendError> {
        let file: RuleFile = toml::from_str(text).map_err(|e| BackendError::RuleParse(e.to_string()))?;
        Self::compile(file)
    }

    pub fn from_json(text: &str) -> Result<Self, BackendError> {
        let file: RuleFile =
            serde_json::from_str(text).map_err(|e| BackendError::RuleParse(e.to_string()))?;
        Self::compile(file)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, BackendError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| BackendError::RuleParse(format!("{}: {e}", path.display())))?;
        if path.extension().is_some_and(|e| e == "json") {
            Self::from_json(&text)
        } else {
            Self::from_toml(&text)
        }
    }

    fn compile(file: RuleFile) -> Result<Self, BackendError> {
        let mut rules = Vec::with_capacity(file.rules.len());
        for (i, rule) in file.rules.into_iter().enumerate() {
            let name = if rule.name.is_empty() { format!("rule {}", i + 1) } else { rule.name.clone() };
            let mut actions = Vec::new();
            for raw in &rule.actions {
                match normalize_label(raw, Level::Specific) {
                    Ok(ActionLabel::Specific(s)) => actions.push(s),
                    _ => {
                        return Err(BackendError::RuleParse(format!(
                            "{name}: action {raw:?} is outside the taxonomy"
                        )))
                    }
                }
            }
            let target = rule
                .target
                .as_deref()
                .map(|t| {
                    t.parse::<TargetModality>()
                        .map_err(|_| BackendError::RuleParse(format!("{name}: unknown target {t:?}")))
                })
                .transpose()?;
            if actions.is_empty() && target.is_none() {
                return Err(BackendError::RuleParse(format!("{name}: needs actions or a target")));
            }
            let when = rule
                .when
                .iter()
                .map(|c| (c.field.to_lowercase(), c.contains.to_lowercase()))
                .collect();
            rules.push(CompiledRule { name, when, actions, target, cot: rule.cot });
        }
        let explicit_fallback = file.fallback.is_some();
        let fallback = match &file.fallback {
            Some(spec) => Fallback::default().apply(spec)?,
            None => Fallback::default(),
        };
        Ok(RuleTable { rules, fallback, explicit_fallback })
    }

    /// Replaces the fallback unless the table declared its own.
    pub fn with_default_fallback(mut self, fallback: Fallback) -> Self {
        if !self.explicit_fallback {
            self.fallback = fallback;
        }
        self
    }

    pub fn len(&self) -> usize {
        self.rules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }

    fn matching<'a>(&'a self, tuple: &str) -> impl Iterator<Item = &'a CompiledRule> + 'a {
        let fields: HashMap<String, String> = match serde_json::from_str::<Value>(tuple) {
            Ok(Value::Object(map)) => map
                .into_iter()
                .map(|(k, v)| {
                    let text = match v {
                        Value::String(s) => s,
                        Value::Array(items) => items
                            .iter()
                            .filter_map(Value::as_str)
                            .collect::<Vec<_>>()
                            .join(" "),
                        other => other.to_string(),
                    };
                    (k.to_lowercase(), text.to_lowercase())
                })
                .collect(),
            _ => HashMap::new(),
        };
        let whole = tuple.to_lowercase();
        self.rules.iter().filter(move |r| {
            r.when.iter().all(|(field, needle)| {
                let hay = if field == "any" { Some(&whole) } else { fields.get(field) };
                hay.is_some_and(|h| h.contains(needle.as_str()))
            })
        })
    }
}

enum Mode {
    Rules(RuleTable),
    Oracle(HashMap<String, Labels>),
}

pub struct MockBackend {
    mode: Mode,
    model: String,
    requests: AtomicUsize,
}

impl MockBackend {
    pub fn rules(table: RuleTable) -> Self {
        MockBackend { mode: Mode::Rules(table), model: "mock".into(), requests: AtomicUsize::new(0) }
    }

    pub fn empty_rules() -> Self {
        Self::rules(RuleTable::empty())
    }

    /// Ground-truth answers for every labeled entry of `corpus`.
    pub fn oracle(corpus: &[DiaryEntry]) -> Result<Self, BackendError> {
        let mut index = HashMap::new();
        for e in corpus {
            let labels = e
                .labels
                .clone()
                .ok_or_else(|| BackendError::Config(format!("oracle corpus entry {:?} is unlabeled", e.id)))?;
            for v in ContextVariant::ALL {
                index.entry(e.tuple(v)).or_insert_with(|| labels.clone());
            }
        }
        Ok(MockBackend { mode: Mode::Oracle(index), model: "oracle".into(), requests: AtomicUsize::new(0) })
    }

    pub fn with_model_name(mut self, name: impl Into<String>) -> Self {
        self.model = name.into();
        self
    }

    pub fn is_oracle(&self) -> bool {
        matches!(self.mode, Mode::Oracle(_))
    }

    pub fn requests(&self) -> usize {
        self.requests.load(Ordering::SeqCst)
    }

    fn oracle_labels<'a>(index: &'a HashMap<String, Labels>, tuple: &str) -> Result<&'a Labels, BackendError> {
        index
            .get(tuple)
            .ok_or_else(|| BackendError::InvalidRequest("oracle has no entry for this tuple".into()))
    }

    fn answer_actions(&self, query: &str, level: Level, n: usize) -> Result<String, BackendError> {
        let purpose = Purpose::for_level(level);
        let items: Vec<AnswerItem> = match &self.mode {
            Mode::Oracle(index) => {
                let labels = Self::oracle_labels(index, query)?;
                let cot = labels.cot.clone().unwrap_or_else(|| "Ground truth.".into());
                labels
                    .actions(level)
                    .into_iter()
                    .map(|a| AnswerItem { cot: cot.clone(), prediction: a.prompt_label().to_string() })
                    .collect()
            }
            Mode::Rules(table) => {
                let mut picked: Vec<(ActionLabel, String)> = Vec::new();
                for rule in table.matching(query) {
                    let cot = rule
                        .cot
                        .clone()
                        .unwrap_or_else(|| format!("The capture matches {}.", rule.name));
                    for s in &rule.actions {
                        let label = match level {
                            Level::General => ActionLabel::General(s.general()),
                            Level::Specific => ActionLabel::Specific(*s),
                        };
                        if !picked.iter().any(|(l, _)| *l == label) {
                            picked.push((label, cot.clone()));
                        }
                    }
                }
                for label in table.fallback.actions(level) {
                    if picked.len() >= n {
                        break;
                    }
                    if !picked.iter().any(|(l, _)| *l == label) {
                        picked.push((label, "This is one of the most frequent follow-up actions.".into()));
                    }
                }
                picked.truncate(n);
                picked
                    .into_iter()
                    .map(|(l, cot)| AnswerItem { cot, prediction: l.prompt_label().to_string() })
                    .collect()
            }
        };
        Ok(render_answer(purpose, &items))
    }

    fn answer_target(&self, query: &str, family: Family) -> Result<String, BackendError> {
        let item = match &self.mode {
            Mode::Oracle(index) => {
                let labels = Self::oracle_labels(index, query)?;
                AnswerItem {
                    cot: labels.cot.clone().unwrap_or_else(|| "Ground truth.".into()),
                    prediction: labels.target.canonical_name().to_string(),
                }
            }
            Mode::Rules(table) => table
                .matching(query)
                .find_map(|r| {
                    r.target.filter(|t| t.family() == family).map(|t| AnswerItem {
                        cot: r.cot.clone().unwrap_or_else(|| format!("The capture matches {}.", r.name)),
                        prediction: t.canonical_name().to_string(),
                    })
                })
                .unwrap_or_else(|| AnswerItem {
                    cot: "This is the most frequent target in this modality.".into(),
                    prediction: table.fallback.target(family).canonical_name().to_string(),
                }),
        };
        Ok(render_answer(Purpose::for_family(family), &[item]))
    }

    fn answer_cot(&self, query: &str) -> Result<String, BackendError> {
        let field = |prefix: &str| {
            query
                .lines()
                .find_map(|l| l.strip_prefix(prefix))
                .map(str::trim)
                .unwrap_or_default()
                .to_string()
        };
        let tuple = field("Input: ");
        let actions: Vec<String> = field("Follow-up actions: ")
            .split(',')
            .map(|s| s.trim().to_string())
            .filter(|s| !s.is_empty())
            .collect();
        let cot = match &self.mode {
            Mode::Oracle(index) => Self::oracle_labels(index, &tuple)?
                .cot
                .clone()
                .unwrap_or_else(|| third_person(&field("Goal and reason: "))),
            Mode::Rules(_) => {
                let goal = third_person(&field("Goal and reason: "));
                let goal = goal.strip_prefix("They").map_or(goal.clone(), |rest| format!("they{rest}"));
                format!("Based on what was captured, {goal}")
            }
        };
        let items: Vec<AnswerItem> = actions
            .into_iter()
            .map(|a| AnswerItem { cot: cot.clone(), prediction: a })
            .collect();
        Ok(render_answer(Purpose::CotGen, &items))
    }
}

/// Swaps first-person pronouns for third-person ones.
pub(crate) fn third_person(text: &str) -> String {
    let words: Vec<String> = text
        .split_whitespace()
        .map(|w| {
            let core_end = w.trim_end_matches(|c: char| !c.is_alphanumeric() && c != '\'').len();
            let (core, tail) = w.split_at(core_end);
            let swapped = match core {
                "I" => "they",
                "I'm" => "they're",
                "I've" => "they've",
                "I'd" => "they'd",
                "I'll" => "they'll",
                "my" | "My" => "their",
                "me" => "them",
                "mine" => "theirs",
                "myself" => "themselves",
                "am" => "are",
                other => other,
            };
            format!("{swapped}{tail}")
        })
        .collect();
    let mut out = words.join(" ");
    if let Some(first) = out.get(0..1) {
        if first == "t" && out.starts_with("they") {
            out.replace_range(0..1, "T");
        }
    }
    out
}

impl Backend for MockBackend {
    fn model_name(&self) -> &str {
        &self.model
    }

    fn chat(&self, bundle: &PromptBundle) -> Result<String, BackendError> {
        self.requests.fetch_add(1, Ordering::SeqCst);
        let query = bundle.query();
        match bundle.purpose {
            Purpose::ActionGeneral | Purpose::ActionSpecific => {
                let level = bundle.purpose.level().expect("action purpose");
                let n = bundle.n_predictions.unwrap_or(3).max(1);
                self.answer_actions(query, level, n)
            }
            Purpose::TargetVisual | Purpose::TargetAudio => {
                self.answer_target(query, bundle.purpose.family().expect("target purpose"))
            }
            Purpose::CotGen => self.answer_cot(query),
        }
    }

    fn classify(&self, tuple: &str, space: Purpose, n: usize) -> Result<RankedLabels, BackendError> {
        self.requests.fetch_add(1, Ordering::SeqCst);
        let all = label_space(space)?;
        let mut scores: Vec<(PredictedLabel, f64)> = Vec::new();
        match &self.mode {
            Mode::Oracle(index) => {
                let labels = Self::oracle_labels(index, tuple)?;
                let truth: Vec<PredictedLabel> = match space {
                    Purpose::ActionGeneral => labels.actions(Level::General).into_iter().map(PredictedLabel::Action).collect(),
                    Purpose::ActionSpecific => labels.actions(Level::Specific).into_iter().map(PredictedLabel::Action).collect(),
                    _ => vec![PredictedLabel::Target(labels.target)],
                };
                for l in all {
                    scores.push((l, if truth.contains(&l) { 1.0 } else { 0.0 }));
                }
            }
            Mode::Rules(table) => {
                let mut ordered: Vec<PredictedLabel> = Vec::new();
                for rule in table.matching(tuple) {
                    match space.family() {
                        Some(family) => {
                            if let Some(t) = rule.target.filter(|t| t.family() == family) {
                                ordered.push(PredictedLabel::Target(t));
                            }
                        }
                        None => {
                            let level = space.level().expect("action space");
                            for s in &rule.actions {
                                ordered.push(PredictedLabel::Action(match level {
                                    Level::General => ActionLabel::General(s.general()),
                                    Level::Specific => ActionLabel::Specific(*s),
                                }));
                            }
                        }
                    }
                }
                let fallback: Vec<PredictedLabel> = match (space.level(), space.family()) {
                    (Some(level), _) => table.fallback.actions(level).into_iter().map(PredictedLabel::Action).collect(),
                    (_, Some(family)) => {
                        let top = table.fallback.target(family);
                        let mut v = vec![PredictedLabel::Target(top)];
                        v.extend(family.modalities().iter().filter(|&&m| m != top).map(|&m| PredictedLabel::Target(m)));
                        v
                    }
                    _ => unreachable!("label_space rejected cot_gen"),
                };
                for (i, l) in ordered.iter().enumerate() {
                    if !scores.iter().any(|(x, _)| x == l) {
                        scores.push((*l, 1.0 - 0.01 * i as f64));
                    }
                }
                for (i, l) in fallback.iter().enumerate() {
                    if !scores.iter().any(|(x, _)| x == l) {
                        scores.push((*l, 0.5 - 0.01 * i as f64));
                    }
                }
            }
        }
        let named: Vec<(&str, f64)> = scores.iter().map(|(l, s)| (l.canonical_name(), *s)).collect();
        rank_labels(space, &named, n)
    }

    fn max_in_flight(&self) -> usize {
        4
    }
}
