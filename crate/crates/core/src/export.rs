//! Fine-tuning dataset exporters (chat and legacy prompt/completion) and
//! their readers.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backend::{run_bounded, Backend};
use crate::corpus::{ContextVariant, DiaryEntry};
use crate::parser::parse_prediction;
use crate::prompt::{action_system_prompt, build_cot_generation_prompt, ChatMessage, Purpose, Role};
use crate::taxonomy::Level;

/// Appended to every legacy prompt.
pub const LEGACY_SEPARATOR: &str = "\n\n###\n\n";

/// Number of predictions requested in the exported system prompt.
pub const EXPORT_TOP_N: usize = 3;

#[derive(Debug, Error)]
pub enum ExportError {
    #[error("entry {0:?} has no reasoning text; run CoT generation first")]
    MissingCot(String),
    #[error("entry {0:?} has no labels")]
    Unlabeled(String),
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LegacyTask {
    Target,
    Action(Level),
}

/// One chat fine-tuning example.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChatExample {
    pub messages: Vec<ChatMessage>,
}

/// Assistant item of a chat example.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChatAnswerItem {
    pub chain_of_thoughts: String,
    pub prediction: String,
}

/// One legacy prompt/completion pair.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LegacyExample {
    pub prompt: String,
    pub completion: String,
}

impl LegacyExample {
    /// Tuple text without the separator.
    pub fn tuple(&self) -> &str {
        self.prompt.strip_suffix(LEGACY_SEPARATOR).unwrap_or(&self.prompt)
    }

    pub fn label(&self) -> &str {
        self.completion.trim_start()
    }
}

/// Chat examples: system task description, full-context tuple, and the
/// assistant's JSON list of reasoning plus canonical label.
pub fn export_finetune_chat(corpus: &[DiaryEntry], level: Level) -> Result<Vec<ChatExample>, ExportError> {
    let system = action_system_prompt(level, EXPORT_TOP_N);
    corpus
        .iter()
        .map(|e| {
            let labels = e.labels.as_ref().ok_or_else(|| ExportError::MissingCot(e.id.clone()))?;
            let cot = labels
                .cot
                .as_ref()
                .filter(|c| !c.trim().is_empty())
                .ok_or_else(|| ExportError::MissingCot(e.id.clone()))?;
            let items: Vec<ChatAnswerItem> = labels
                .actions(level)
                .into_iter()
                .map(|a| ChatAnswerItem {
                    chain_of_thoughts: cot.clone(),
                    prediction: a.canonical_name().to_string(),
                })
                .collect();
            Ok(ChatExample {
                messages: vec![
                    ChatMessage::system(system.clone()),
                    ChatMessage::user(e.tuple(ContextVariant::Full)),
                    ChatMessage::assistant(serde_json::to_string(&items).expect("answer serializes")),
                ],
            })
        })
        .collect()
}

/// Legacy pairs; multi-label entries yield one line per label.
pub fn export_finetune_legacy(corpus: &[DiaryEntry], task: LegacyTask) -> Result<Vec<LegacyExample>, ExportError> {
    let mut out = Vec::new();
    for e in corpus {
        let labels = e.labels.as_ref().ok_or_else(|| ExportError::Unlabeled(e.id.clone()))?;
        let prompt = format!("{}{LEGACY_SEPARATOR}", e.tuple(ContextVariant::Full));
        let names: Vec<&str> = match task {
            LegacyTask::Target => vec![labels.target.canonical_name()],
            LegacyTask::Action(level) => {
                labels.actions(level).into_iter().map(|a| a.canonical_name()).collect()
            }
        };
        for name in names {
            out.push(LegacyExample { prompt: prompt.clone(), completion: format!(" {name}") });
        }
    }
    Ok(out)
}

/// An entry whose reasoning text could not be generated.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CotFailure {
    pub id: String,
    pub reason: String,
}

/// Fills missing reasoning text by sending each entry's goal/reason through
/// CoT generation on `backend`. Entries that already have reasoning are
/// kept unless `overwrite`; failed entries are returned unchanged.
pub fn generate_cots(
    corpus: &[DiaryEntry],
    backend: &dyn Backend,
    overwrite: bool,
) -> (Vec<DiaryEntry>, Vec<CotFailure>) {
    let results = run_bounded(corpus, backend.max_in_flight(), |_, e| -> Result<Option<String>, String> {
        let Some(labels) = &e.labels else { return Ok(None) };
        if labels.cot.is_some() && !overwrite {
            return Ok(None);
        }
        let bundle = build_cot_generation_prompt(e).map_err(|err| err.to_string())?;
        let raw = backend.chat(&bundle).map_err(|err| err.to_string())?;
        let set = parse_prediction(&raw, Purpose::CotGen, labels.specific_actions.len().max(1))
            .map_err(|err| err.to_string())?;
        set.predictions
            .into_iter()
            .map(|p| p.cot)
            .find(|c| !c.trim().is_empty())
            .map(Some)
            .ok_or_else(|| "no reasoning text in model output".to_string())
    });
    let mut out = Vec::with_capacity(corpus.len());
    let mut failures = Vec::new();
    for (e, r) in corpus.iter().zip(results) {
        let mut e = e.clone();
        match r {
            Ok(Some(cot)) => e.labels.as_mut().expect("checked above").cot = Some(cot),
            Ok(None) => {}
            Err(reason) => failures.push(CotFailure { id: e.id.clone(), reason }),
        }
        out.push(e);
    }
    (out, failures)
}

pub fn to_jsonl<T: Serialize>(items: &[T]) -> String {
    let mut out = String::new();
    for item in items {
        out.push_str(&serde_json::to_string(item).expect("examples serialize"));
        out.push('\n');
    }
    out
}

fn read_jsonl<T: for<'de> Deserialize<'de>>(text: &str) -> Result<Vec<T>, ExportError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| ExportError::Malformed { line: i + 1, message: e.to_string() })
        })
        .collect()
}

pub fn read_chat_jsonl(text: &str) -> Result<Vec<ChatExample>, ExportError> {
    let examples: Vec<ChatExample> = read_jsonl(text)?;
    for (i, ex) in examples.iter().enumerate() {
        let roles: Vec<Role> = ex.messages.iter().map(|m| m.role).collect();
        if roles != [Role::System, Role::User, Role::Assistant] {
            return Err(ExportError::Malformed { line: i + 1, message: "expected system, user, assistant".into() });
        }
    }
    Ok(examples)
}

pub fn read_legacy_jsonl(text: &str) -> Result<Vec<LegacyExample>, ExportError> {
    let examples: Vec<LegacyExample> = read_jsonl(text)?;
    for (i, ex) in examples.iter().enumerate() {
        if !ex.prompt.ends_with(LEGACY_SEPARATOR) || !ex.completion.starts_with(' ') {
            return Err(ExportError::Malformed { line: i + 1, message: "not a legacy pair".into() });
        }
    }
    Ok(examples)
}

/// Decodes the assistant list of a chat example.
pub fn chat_answer(example: &ChatExample) -> Result<Vec<ChatAnswerItem>, ExportError> {
    let content = &example.messages.last().expect("validated").content;
    serde_json::from_str(content).map_err(|e| ExportError::Malformed { line: 0, message: e.to_string() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{ContextInfo, Labels, StructuredCapture};
    use crate::taxonomy::{SpecificAction, TargetModality};

    fn entry(id: &str, actions: &[SpecificAction], cot: Option<&str>) -> DiaryEntry {
        DiaryEntry {
            id: id.into(),
            capture: StructuredCapture { scene_caption: Some("a dog in a park".into()), ..Default::default() },
            context: ContextInfo::new(Some("park"), Some("walking")),
            labels: Some(Labels {
                target: TargetModality::Object,
                specific_actions: actions.to_vec(),
                goal_reason: None,
                cot: cot.map(String::from),
            }),
        }
    }

    #[test]
    fn chat_export_shape() {
        let corpus = vec![
            entry("a", &[SpecificAction::ShareWithOthers, SpecificAction::Remember], Some("They love dogs.")),
            entry("b", &[SpecificAction::SearchOnline], Some("They want the breed.")),
        ];
        let out = export_finetune_chat(&corpus, Level::Specific).unwrap();
        assert_eq!(out.len(), 2);
        assert!(out.iter().all(|e| e.messages.len() == 3));
        let items = chat_answer(&out[0]).unwrap();
        assert_eq!(items.len(), 2);
        assert_eq!(items[0].prediction, "ShareWithOthers");
        let back = read_chat_jsonl(&to_jsonl(&out)).unwrap();
        assert_eq!(back, out);
    }

    #[test]
    fn chat_export_requires_cot() {
        let err = export_finetune_chat(&[entry("x", &[SpecificAction::Remember], None)], Level::General);
        assert!(matches!(err, Err(ExportError::MissingCot(id)) if id == "x"));
    }

    #[test]
    fn cot_generation_fills_missing_only() {
        use crate::backend::MockBackend;
        let mut with_goal = entry("a", &[SpecificAction::SearchOnline], None);
        with_goal.labels.as_mut().unwrap().goal_reason = Some("I want to know the breed.".into());
        let no_goal = entry("b", &[SpecificAction::Remember], None);
        let done = entry("c", &[SpecificAction::Remember], Some("Already written."));
        let (out, failures) = generate_cots(&[with_goal, no_goal, done], &MockBackend::empty_rules(), false);
        let cot = out[0].labels.as_ref().unwrap().cot.as_deref().unwrap();
        assert!(cot.contains("they want to know the breed"), "{cot}");
        assert_eq!(failures.len(), 1);
        assert_eq!(failures[0].id, "b");
        assert_eq!(out[2].labels.as_ref().unwrap().cot.as_deref(), Some("Already written."));
    }

    #[test]
    fn legacy_one_line_per_label() {
        let e = entry(
            "a",
            &[SpecificAction::ShareWithOthers, SpecificAction::Remember, SpecificAction::SearchOnline],
            None,
        );
        let lines = export_finetune_legacy(std::slice::from_ref(&e), LegacyTask::Action(Level::Specific)).unwrap();
        assert_eq!(lines.len(), 3);
        assert!(lines.iter().all(|l| l.prompt.ends_with("###\n\n")));
        assert_eq!(lines[2].completion, " SearchOnline");
        let targets = export_finetune_legacy(&[e], LegacyTask::Target).unwrap();
        assert_eq!(targets.len(), 1);
        assert_eq!(targets[0].label(), "object");
    }
}
