//! Prompt assembly for chain-of-thought generation, target-information
//! prediction and follow-up action prediction, plus few-shot selection.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{ContextVariant, DiaryEntry};
use crate::taxonomy::{
    fold, ActionLabel, Family, GeneralAction, Level, SpecificAction, TargetModality,
};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PromptError {
    #[error("in-context prompting needs at least one few-shot exemplar")]
    EmptyFewShots,
    #[error("entry {id:?} has no {family} content")]
    FamilyMismatch { id: String, family: Family },
    #[error("entry {0:?} has no goal/reason text")]
    MissingGoalReason(String),
    #[error("entry {0:?} has no labels")]
    Unlabeled(String),
    #[error("number of predictions must be at least 1")]
    ZeroPredictions,
    #[error("no training entry has target modality {0}")]
    MissingModality(TargetModality),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
}

impl ChatMessage {
    pub fn system(content: impl Into<String>) -> Self {
        ChatMessage { role: Role::System, content: content.into() }
    }

    pub fn user(content: impl Into<String>) -> Self {
        ChatMessage { role: Role::User, content: content.into() }
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        ChatMessage { role: Role::Assistant, content: content.into() }
    }
}

/// What a bundle asks the model to produce.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Purpose {
    CotGen,
    TargetVisual,
    TargetAudio,
    ActionGeneral,
    ActionSpecific,
}

impl Purpose {
    pub fn as_str(self) -> &'static str {
        match self {
            Purpose::CotGen => "cot_gen",
            Purpose::TargetVisual => "target_visual",
            Purpose::TargetAudio => "target_audio",
            Purpose::ActionGeneral => "action_general",
            Purpose::ActionSpecific => "action_specific",
        }
    }

    pub fn for_level(level: Level) -> Purpose {
        match level {
            Level::General => Purpose::ActionGeneral,
            Level::Specific => Purpose::ActionSpecific,
        }
    }

    pub fn for_family(family: Family) -> Purpose {
        match family {
            Family::Visual => Purpose::TargetVisual,
            Family::Audio => Purpose::TargetAudio,
        }
    }

    pub fn level(self) -> Option<Level> {
        match self {
            Purpose::ActionGeneral => Some(Level::General),
            Purpose::ActionSpecific => Some(Level::Specific),
            _ => None,
        }
    }

    pub fn family(self) -> Option<Family> {
        match self {
            Purpose::TargetVisual => Some(Family::Visual),
            Purpose::TargetAudio => Some(Family::Audio),
            _ => None,
        }
    }

    /// Reasoning key the prompt asks for.
    pub fn cot_key(self) -> &'static str {
        match self {
            Purpose::ActionGeneral => "chain_of_thoughts",
            _ => "chain-of-thoughts",
        }
    }
}

impl fmt::Display for Purpose {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Purpose {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        [
            Purpose::CotGen,
            Purpose::TargetVisual,
            Purpose::TargetAudio,
            Purpose::ActionGeneral,
            Purpose::ActionSpecific,
        ]
        .into_iter()
        .find(|p| fold(p.as_str()) == fold(s))
        .ok_or_else(|| format!("unknown purpose {s:?}"))
    }
}

/// Ordered role-tagged messages plus the metadata needed to parse the answer.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptBundle {
    pub messages: Vec<ChatMessage>,
    pub purpose: Purpose,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_predictions: Option<usize>,
    pub context_variant: ContextVariant,
}

impl PromptBundle {
    pub fn system(&self) -> &str {
        &self.messages[0].content
    }

    /// Content of the final user message (the query tuple for prediction
    /// bundles).
    pub fn query(&self) -> &str {
        &self.messages.last().expect("bundles are never empty").content
    }

    /// Human-readable rendering for inspection.
    pub fn render(&self) -> String {
        let mut out = format!("# purpose: {}", self.purpose);
        if let Some(n) = self.n_predictions {
            out.push_str(&format!(", n: {n}"));
        }
        out.push_str(&format!(", context: {}\n", self.context_variant));
        for m in &self.messages {
            let role = match m.role {
                Role::System => "system",
                Role::User => "user",
                Role::Assistant => "assistant",
            };
            out.push_str(&format!("\n[{role}]\n{}\n", m.content));
        }
        out
    }
}

const ACTION_INTRO: &str = "You are an assistant that predicts the follow-up actions users will take based on multimodal information input using chain-of-thoughts analysis.";

const TARGET_INTRO: &str = "You are an assistant that predicts the target information that users take follow-up actions on when they encounter multimodal information using chain-of-thoughts analysis.";

const COT_INTRO: &str = "You are an assistant that produces chain-of-thoughts analysis leading to reasons about why users take specific follow-up actions from a third-person perspective. You should operate under the assumption that the goal is not known to you.";

const LIST_OUTPUT: &str = "Output in a list of JSON dicts, where applicable:  \"chain-of-thoughts\", \"prediction\" (the follow-up actions)";

const GENERAL_OUTPUT: &str = "Output the prediction result in a list of JSON dicts (the length will be the number of prediction), where applicable: \"chain_of_thoughts\", \"prediction\"\n\nOutput the general category";

const TARGET_OUTPUT: &str =
    "Output the prediction result in a JSON dict, where applicable: \"chain-of-thoughts\", \"prediction\"";

fn specific_listing() -> String {
    SpecificAction::ALL
        .iter()
        .map(|s| s.definition_line())
        .collect::<Vec<_>>()
        .join("\n")
}

fn grouped_listing() -> String {
    GeneralAction::ALL
        .iter()
        .map(|g| {
            let lines: Vec<String> = g.children().map(|s| s.grouped_definition_line()).collect();
            format!("(general)\n{}\n(specific)\n{}", g.prompt_header(), lines.join("\n"))
        })
        .collect::<Vec<_>>()
        .join("\n\n")
}

/// System message for action prediction with `n` substituted.
pub fn action_system_prompt(level: Level, n: usize) -> String {
    let head = format!(
        "{ACTION_INTRO}\nProvide up to {n} most likely follow-up actions from the following options (with definition):"
    );
    match level {
        Level::Specific => {
            format!("{head}\n\nFollow-up actions:\n\n{}\n\n{LIST_OUTPUT}", specific_listing())
        }
        Level::General => format!("{head}\n\n{}\n\n{GENERAL_OUTPUT}", grouped_listing()),
    }
}

pub fn target_system_prompt(family: Family) -> String {
    let classes = family.modalities();
    let count = match classes.len() {
        3 => "three",
        2 => "two",
        _ => unreachable!("families have two or three classes"),
    };
    let names: Vec<&str> = classes.iter().map(|m| m.canonical_name()).collect();
    let defs: Vec<String> = classes
        .iter()
        .map(|m| format!("{}: {}", m.canonical_name(), m.description()))
        .collect();
    format!(
        "{TARGET_INTRO}\n\nThe target information include {count} categories: {}:\n\n{}\n\n{TARGET_OUTPUT}",
        names.join(", "),
        defs.join("\n")
    )
}

pub fn cot_system_prompt() -> String {
    format!("{COT_INTRO}\n\nFollow-up actions:\n{}\n\n{LIST_OUTPUT}", specific_listing())
}

/// Provenance of a few-shot store.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Fixed,
    LearnedFromFeedback,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FewShotStore {
    pub entries: Vec<DiaryEntry>,
    pub provenance: Provenance,
}

impl FewShotStore {
    pub fn fixed(entries: Vec<DiaryEntry>) -> Self {
        FewShotStore { entries, provenance: Provenance::Fixed }
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn ids(&self) -> Vec<&str> {
        self.entries.iter().map(|e| e.id.as_str()).collect()
    }

    pub fn contains(&self, id: &str) -> bool {
        self.entries.iter().any(|e| e.id == id)
    }

    /// Returns a new store with `extra` appended (ids already present are
    /// skipped). The original store is left untouched.
    pub fn promote(&self, extra: impl IntoIterator<Item = DiaryEntry>) -> FewShotStore {
        let mut entries = self.entries.clone();
        for e in extra {
            if !entries.iter().any(|x| x.id == e.id) {
                entries.push(e);
            }
        }
        FewShotStore { entries, provenance: Provenance::LearnedFromFeedback }
    }
}

/// One item of the JSON answer format.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnswerItem {
    pub cot: String,
    pub prediction: String,
}

/// Serializes answer items under the reasoning key requested for `purpose`:
/// a list for action and CoT prompts, a single dict for target prompts.
pub fn render_answer(purpose: Purpose, items: &[AnswerItem]) -> String {
    let key = purpose.cot_key();
    let as_json = |item: &AnswerItem| {
        let mut map = serde_json::Map::new();
        map.insert(key.to_string(), item.cot.clone().into());
        map.insert("prediction".to_string(), item.prediction.clone().into());
        serde_json::Value::Object(map)
    };
    let value = match purpose.family() {
        Some(_) => items.first().map(as_json).unwrap_or(serde_json::Value::Null),
        None => serde_json::Value::Array(items.iter().map(as_json).collect()),
    };
    serde_json::to_string(&value).expect("answer serializes")
}

fn exemplar_reasoning(entry: &DiaryEntry) -> String {
    let labels = entry.labels.as_ref().expect("exemplars are labeled");
    labels
        .cot
        .clone()
        .or_else(|| labels.goal_reason.clone())
        .unwrap_or_else(|| {
            let names: Vec<&str> = labels.specific_actions.iter().map(|s| s.prompt_label()).collect();
            format!("The user may want to act on the {}: {}.", labels.target, names.join(", "))
        })
}

fn action_answer(entry: &DiaryEntry, level: Level) -> Result<String, PromptError> {
    let labels = entry
        .labels
        .as_ref()
        .ok_or_else(|| PromptError::Unlabeled(entry.id.clone()))?;
    let cot = exemplar_reasoning(entry);
    let items: Vec<AnswerItem> = labels
        .actions(level)
        .into_iter()
        .map(|a: ActionLabel| AnswerItem { cot: cot.clone(), prediction: a.prompt_label().to_string() })
        .collect();
    Ok(render_answer(Purpose::for_level(level), &items))
}

/// Builds an action-prediction bundle.
///
/// `fewshots = None` yields a zero-shot bundle (fine-tuned backends); a
/// store that is present must be non-empty.
pub fn build_action_prompt(
    entry: &DiaryEntry,
    level: Level,
    n: usize,
    fewshots: Option<&FewShotStore>,
    variant: ContextVariant,
) -> Result<PromptBundle, PromptError> {
    if n == 0 {
        return Err(PromptError::ZeroPredictions);
    }
    let mut messages = vec![ChatMessage::system(action_system_prompt(level, n))];
    if let Some(store) = fewshots {
        if store.is_empty() {
            return Err(PromptError::EmptyFewShots);
        }
        for ex in &store.entries {
            messages.push(ChatMessage::user(ex.tuple(variant)));
            messages.push(ChatMessage::assistant(action_answer(ex, level)?));
        }
    }
    messages.push(ChatMessage::user(entry.tuple(variant)));
    Ok(PromptBundle {
        messages,
        purpose: Purpose::for_level(level),
        n_predictions: Some(n),
        context_variant: variant,
    })
}

/// Builds a target-information bundle for one modality family. Only
/// exemplars whose target lies in `family` are included.
pub fn build_target_prompt(
    entry: &DiaryEntry,
    family: Family,
    fewshots: Option<&FewShotStore>,
) -> Result<PromptBundle, PromptError> {
    if !entry.capture.has_family(family) {
        return Err(PromptError::FamilyMismatch { id: entry.id.clone(), family });
    }
    let variant = ContextVariant::Full;
    let purpose = Purpose::for_family(family);
    let mut messages = vec![ChatMessage::system(target_system_prompt(family))];
    if let Some(store) = fewshots {
        if store.is_empty() {
            return Err(PromptError::EmptyFewShots);
        }
        for ex in &store.entries {
            let Some(labels) = &ex.labels else { continue };
            if labels.target.family() != family || !ex.capture.has_family(family) {
                continue;
            }
            let item = AnswerItem {
                cot: exemplar_reasoning(ex),
                prediction: labels.target.canonical_name().to_string(),
            };
            messages.push(ChatMessage::user(ex.tuple(variant)));
            messages.push(ChatMessage::assistant(render_answer(purpose, &[item])));
        }
    }
    messages.push(ChatMessage::user(entry.tuple(variant)));
    Ok(PromptBundle { messages, purpose, n_predictions: Some(1), context_variant: variant })
}

/// Builds the bundle that turns a participant's goal/reason into
/// third-person reasoning text.
pub fn build_cot_generation_prompt(entry: &DiaryEntry) -> Result<PromptBundle, PromptError> {
    let labels = entry
        .labels
        .as_ref()
        .ok_or_else(|| PromptError::Unlabeled(entry.id.clone()))?;
    let goal = labels
        .goal_reason
        .as_ref()
        .ok_or_else(|| PromptError::MissingGoalReason(entry.id.clone()))?;
    let actions: Vec<&str> = labels.specific_actions.iter().map(|s| s.prompt_label()).collect();
    let user = format!(
        "Input: {}\nFollow-up actions: {}\nGoal and reason: {}",
        entry.tuple(ContextVariant::Full),
        actions.join(", "),
        goal
    );
    Ok(PromptBundle {
        messages: vec![ChatMessage::system(cot_system_prompt()), ChatMessage::user(user)],
        purpose: Purpose::CotGen,
        n_predictions: None,
        context_variant: ContextVariant::Full,
    })
}

/// Few-shot selection plus the categories it could not cover.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FewShotSelection {
    pub store: FewShotStore,
    pub uncovered: Vec<SpecificAction>,
}

/// Greedy set cover over specific-action labels.
///
/// Repeatedly picks the entry covering the most still-uncovered actions,
/// breaking ties by ascending id, until everything is covered or no entry
/// adds coverage. Unlabeled pool entries are ignored.
pub fn select_fewshots_actions(pool: &[DiaryEntry]) -> FewShotSelection {
    let mut candidates: Vec<&DiaryEntry> = pool.iter().filter(|e| e.labels.is_some()).collect();
    candidates.sort_by(|a, b| a.id.cmp(&b.id));
    let mut uncovered: BTreeSet<SpecificAction> = SpecificAction::ALL.into_iter().collect();
    let mut chosen: Vec<DiaryEntry> = Vec::new();

    while !uncovered.is_empty() {
        let mut best: Option<(usize, usize)> = None;
        for (i, e) in candidates.iter().enumerate() {
            let gain = e
                .labels
                .as_ref()
                .map(|l| l.specific_actions.iter().filter(|s| uncovered.contains(s)).count())
                .unwrap_or(0);
            if gain > best.map_or(0, |(_, g)| g) {
                best = Some((i, gain));
            }
        }
        let Some((i, _)) = best else { break };
        let picked = candidates.remove(i);
        for s in &picked.labels.as_ref().expect("filtered").specific_actions {
            uncovered.remove(s);
        }
        chosen.push(picked.clone());
    }

    FewShotSelection {
        store: FewShotStore::fixed(chosen),
        uncovered: uncovered.into_iter().collect(),
    }
}

/// One exemplar per target modality: the lowest id with that target.
pub fn select_fewshots_target(pool: &[DiaryEntry]) -> Result<FewShotStore, PromptError> {
    let mut picked = Vec::with_capacity(TargetModality::ALL.len());
    for m in TargetModality::ALL {
        let best = pool
            .iter()
            .filter(|e| e.labels.as_ref().is_some_and(|l| l.target == m))
            .min_by(|a, b| a.id.cmp(&b.id))
            .ok_or(PromptError::MissingModality(m))?;
        picked.push(best.clone());
    }
    Ok(FewShotStore::fixed(picked))
}
