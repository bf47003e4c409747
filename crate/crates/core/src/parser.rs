//! Extraction of structured predictions from free-form model output.

use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::prompt::{render_answer, AnswerItem, Purpose};
use crate::taxonomy::{fold, normalize_label, ActionLabel, Level, TargetModality};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("model output is empty")]
    Empty,
    #[error("no JSON prediction found in model output")]
    NoJson,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(untagged)]
pub enum PredictedLabel {
    Action(ActionLabel),
    Target(TargetModality),
}

impl PredictedLabel {
    pub fn canonical_name(self) -> &'static str {
        match self {
            PredictedLabel::Action(a) => a.canonical_name(),
            PredictedLabel::Target(t) => t.canonical_name(),
        }
    }

    pub fn as_action(self) -> Option<ActionLabel> {
        match self {
            PredictedLabel::Action(a) => Some(a),
            PredictedLabel::Target(_) => None,
        }
    }

    pub fn as_target(self) -> Option<TargetModality> {
        match self {
            PredictedLabel::Target(t) => Some(t),
            PredictedLabel::Action(_) => None,
        }
    }

    fn prompt_label(self) -> &'static str {
        match self {
            PredictedLabel::Action(a) => a.prompt_label(),
            PredictedLabel::Target(t) => t.canonical_name(),
        }
    }
}

impl fmt::Display for PredictedLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.canonical_name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Prediction {
    pub cot: String,
    pub label: PredictedLabel,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ParseWarning {
    /// The JSON answer was embedded in surrounding text or a code fence.
    Extracted,
    /// No well-formed JSON; predictions were recovered from key/value fragments.
    RecoveredFragments,
    /// A prediction did not match the taxonomy.
    LabelError { raw: String },
    /// A repeated label was dropped.
    Duplicate { label: String },
    /// More predictions than requested; the tail was dropped.
    Truncated { found: usize, kept: usize },
}

impl ParseWarning {
    pub fn kind(&self) -> &'static str {
        match self {
            ParseWarning::Extracted => "extracted",
            ParseWarning::RecoveredFragments => "recovered_fragments",
            ParseWarning::LabelError { .. } => "label_error",
            ParseWarning::Duplicate { .. } => "duplicate",
            ParseWarning::Truncated { .. } => "truncated",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PredictionSet {
    pub predictions: Vec<Prediction>,
    pub raw: String,
    pub warnings: Vec<ParseWarning>,
}

impl PredictionSet {
    /// Output of a failed parse: nothing predicted, raw text kept.
    pub fn empty(raw: impl Into<String>) -> Self {
        PredictionSet { predictions: Vec::new(), raw: raw.into(), warnings: Vec::new() }
    }

    pub fn labels(&self) -> Vec<PredictedLabel> {
        self.predictions.iter().map(|p| p.label).collect()
    }

    pub fn action_labels(&self) -> Vec<ActionLabel> {
        self.predictions.iter().filter_map(|p| p.label.as_action()).collect()
    }

    pub fn label_errors(&self) -> Vec<&str> {
        self.warnings
            .iter()
            .filter_map(|w| match w {
                ParseWarning::LabelError { raw } => Some(raw.as_str()),
                _ => None,
            })
            .collect()
    }

    /// Renders the predictions in the answer format requested for `purpose`.
    pub fn to_canonical_json(&self, purpose: Purpose) -> String {
        let items: Vec<AnswerItem> = self
            .predictions
            .iter()
            .map(|p| AnswerItem { cot: p.cot.clone(), prediction: p.label.prompt_label().to_string() })
            .collect();
        render_answer(purpose, &items)
    }
}

/// Raw (reasoning, label) pairs pulled out of a JSON value.
fn items_from_value(value: &Value) -> Vec<(String, Value)> {
    match value {
        Value::Array(items) => items
            .iter()
            .flat_map(|item| match item {
                Value::Object(_) => items_from_value(item),
                Value::String(_) => vec![(String::new(), item.clone())],
                _ => Vec::new(),
            })
            .collect(),
        Value::Object(map) => {
            let mut cot = String::new();
            let mut prediction = None;
            let mut nested = None;
            for (k, v) in map {
                match fold(k).as_str() {
                    "chainofthoughts" | "chainofthought" => {
                        if let Some(s) = v.as_str() {
                            cot = s.to_string();
                        }
                    }
                    "prediction" => prediction = Some(v),
                    "predictions" | "results" => nested = Some(v),
                    _ => {}
                }
            }
            match (prediction, nested) {
                (Some(Value::Array(labels)), _) => {
                    labels.iter().map(|l| (cot.clone(), l.clone())).collect()
                }
                (Some(p), _) => vec![(cot, p.clone())],
                (None, Some(n)) => items_from_value(n),
                (None, None) => Vec::new(),
            }
        }
        _ => Vec::new(),
    }
}

/// First JSON array/object in `text` that carries at least one prediction.
fn first_json_with_predictions(text: &str) -> Option<(usize, Vec<(String, Value)>)> {
    for (i, c) in text.char_indices() {
        if c != '[' && c != '{' {
            continue;
        }
        let mut stream = serde_json::Deserializer::from_str(&text[i..]).into_iter::<Value>();
        if let Some(Ok(value)) = stream.next() {
            let items = items_from_value(&value);
            if !items.is_empty() {
                return Some((i, items));
            }
        }
    }
    None
}

/// Salvages `"prediction": "<label>"` pairs from text that is not valid JSON.
fn fragments(text: &str) -> Vec<(String, Value)> {
    let mut out = Vec::new();
    let mut rest = text;
    while let Some(pos) = rest.find("\"prediction\"") {
        rest = &rest[pos + "\"prediction\"".len()..];
        let after = rest.trim_start();
        let Some(value_text) = after.strip_prefix(':') else { continue };
        let value_text = value_text.trim_start();
        if value_text.starts_with('"') {
            let mut stream = serde_json::Deserializer::from_str(value_text).into_iter::<Value>();
            if let Some(Ok(v @ Value::String(_))) = stream.next() {
                out.push((String::new(), v));
            }
        }
    }
    out
}

fn normalize(raw: &str, expected: Purpose) -> Option<PredictedLabel> {
    let attempt = |s: &str| match expected.family() {
        Some(family) => TargetModality::normalize_in(s, family).ok().map(PredictedLabel::Target),
        None => {
            let level = expected.level().unwrap_or(Level::Specific);
            normalize_label(s, level).ok().map(PredictedLabel::Action)
        }
    };
    // Models sometimes echo the whole "Label: definition" line.
    attempt(raw).or_else(|| raw.split_once(':').and_then(|(head, _)| attempt(head)))
}

/// Extracts up to `n` normalized predictions from raw model output.
///
/// The first well-formed JSON array or object carrying a `prediction` key
/// wins, wherever it sits (plain, in prose, or inside a code fence). Both
/// `chain_of_thoughts` and `chain-of-thoughts` are accepted. Unknown labels,
/// duplicates and truncation are reported as warnings; only the absence of
/// any prediction is an error.
pub fn parse_prediction(raw: &str, expected: Purpose, n: usize) -> Result<PredictionSet, ParseError> {
    let trimmed = raw.trim();
    if trimmed.is_empty() {
        return Err(ParseError::Empty);
    }
    let mut warnings = Vec::new();
    let items = match first_json_with_predictions(trimmed) {
        Some((start, items)) => {
            let whole = start == 0
                && serde_json::from_str::<Value>(trimmed).is_ok();
            if !whole {
                warnings.push(ParseWarning::Extracted);
            }
            items
        }
        None => {
            let recovered = fragments(trimmed);
            if recovered.is_empty() {
                return Err(ParseError::NoJson);
            }
            warnings.push(ParseWarning::RecoveredFragments);
            recovered
        }
    };

    let mut predictions: Vec<Prediction> = Vec::new();
    for (cot, value) in items {
        let raw_label = match &value {
            Value::String(s) => s.clone(),
            other => other.to_string(),
        };
        match normalize(&raw_label, expected) {
            Some(label) if predictions.iter().any(|p| p.label == label) => {
                warnings.push(ParseWarning::Duplicate { label: label.canonical_name().to_string() })
            }
            Some(label) => predictions.push(Prediction { cot, label }),
            None => warnings.push(ParseWarning::LabelError { raw: raw_label }),
        }
    }
    if predictions.len() > n {
        warnings.push(ParseWarning::Truncated { found: predictions.len(), kept: n });
        predictions.truncate(n);
    }
    Ok(PredictionSet { predictions, raw: raw.to_string(), warnings })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::taxonomy::SpecificAction;

    fn specific(s: SpecificAction) -> PredictedLabel {
        PredictedLabel::Action(ActionLabel::Specific(s))
    }

    #[test]
    fn plain_list() {
        let p = parse_prediction(
            r#"[{"chain_of_thoughts":"They want details","prediction":"Search online"}]"#,
            Purpose::ActionSpecific,
            3,
        )
        .unwrap();
        assert_eq!(p.labels(), vec![specific(SpecificAction::SearchOnline)]);
        assert_eq!(p.predictions[0].cot, "They want details");
        assert!(p.warnings.is_empty());
    }

    #[test]
    fn fenced_block_matches_plain() {
        let body = r#"[{"chain-of-thoughts":"a","prediction":"Remember"},{"chain-of-thoughts":"b","prediction":"Share with others"}]"#;
        let fenced = format!("Here is my analysis.\n```json\n{body}\n```\nHope this helps!");
        let a = parse_prediction(body, Purpose::ActionSpecific, 3).unwrap();
        let b = parse_prediction(&fenced, Purpose::ActionSpecific, 3).unwrap();
        assert_eq!(a.predictions, b.predictions);
        assert_eq!(b.warnings, vec![ParseWarning::Extracted]);
    }

    #[test]
    fn unknown_label_from_fragment() {
        let p = parse_prediction(r#""prediction":"Teleport""#, Purpose::ActionSpecific, 3).unwrap();
        assert!(p.predictions.is_empty());
        assert_eq!(p.label_errors(), vec!["Teleport"]);
    }

    #[test]
    fn truncation_and_duplicates() {
        let raw = r#"[{"prediction":"Remember"},{"prediction":"remember"},{"prediction":"Remind"},{"prediction":"Search online"},{"prediction":"Compare"},{"prediction":"Calculate"}]"#;
        let p = parse_prediction(raw, Purpose::ActionSpecific, 3).unwrap();
        assert_eq!(p.predictions.len(), 3);
        assert_eq!(
            p.warnings,
            vec![
                ParseWarning::Duplicate { label: "Remember".into() },
                ParseWarning::Truncated { found: 5, kept: 3 }
            ]
        );
    }

    #[test]
    fn general_level_and_targets() {
        let p = parse_prediction(r#"[{"prediction":"Augment"}]"#, Purpose::ActionGeneral, 3).unwrap();
        assert_eq!(
            p.labels(),
            vec![PredictedLabel::Action(ActionLabel::General(crate::taxonomy::GeneralAction::MediaManipulation))]
        );
        let t = parse_prediction(r#"{"chain-of-thoughts":"x","prediction":"text"}"#, Purpose::TargetVisual, 1).unwrap();
        assert_eq!(t.labels(), vec![PredictedLabel::Target(TargetModality::Text)]);
        let wrong = parse_prediction(r#"{"prediction":"speech"}"#, Purpose::TargetVisual, 1).unwrap();
        assert!(wrong.predictions.is_empty());
        assert_eq!(wrong.label_errors(), vec!["speech"]);
    }

    #[test]
    fn no_json_is_an_error() {
        assert_eq!(parse_prediction("   ", Purpose::ActionSpecific, 3), Err(ParseError::Empty));
        assert_eq!(
            parse_prediction("I think they want to share it.", Purpose::ActionSpecific, 3),
            Err(ParseError::NoJson)
        );
        assert_eq!(parse_prediction("[1, 2, 3]", Purpose::ActionSpecific, 3), Err(ParseError::NoJson));
    }

    #[test]
    fn echoed_definition_line() {
        let p = parse_prediction(
            r#"[{"prediction":"Search online: Search for more information online related to specific goals"}]"#,
            Purpose::ActionSpecific,
            3,
        )
        .unwrap();
        assert_eq!(p.labels(), vec![specific(SpecificAction::SearchOnline)]);
    }
}
