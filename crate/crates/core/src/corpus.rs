//! Diary-entry data model, JSONL I/O, statistics and structured-text tuples.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::taxonomy::{
    normalize_label, ActionLabel, Family, GeneralAction, Level, SpecificAction, TargetModality,
    TaxonomyLabel,
};

/// Largest number of follow-up actions attached to one entry.
pub const MAX_ACTIONS: usize = 4;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("line {line}: invalid field `{field}`: {message}")]
    SchemaError {
        line: usize,
        field: String,
        message: String,
    },
    #[error("duplicate entry id {0:?}")]
    DuplicateId(String),
    #[error("line {line}: label {raw:?} is outside the taxonomy")]
    LabelOutsideTaxonomy { line: usize, raw: String },
    #[error("entry {0:?} has no labels")]
    UnlabeledEntry(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl CorpusError {
    fn schema(line: usize, field: &str, message: impl Into<String>) -> Self {
        CorpusError::SchemaError {
            line,
            field: field.to_string(),
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContextInfo {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub location: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub activity: Option<String>,
}

impl ContextInfo {
    /// Blank strings become `None`.
    pub fn new(location: Option<&str>, activity: Option<&str>) -> Self {
        let clean = |s: Option<&str>| s.map(str::trim).filter(|s| !s.is_empty()).map(String::from);
        ContextInfo {
            location: clean(location),
            activity: clean(activity),
        }
    }
}

/// Textual description of one multimodal capture.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StructuredCapture {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scene_caption: Option<String>,
    #[serde(default)]
    pub objects: Vec<String>,
    #[serde(default)]
    pub visible_text: Vec<String>,
    #[serde(default)]
    pub sound_classes: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub speech_transcript: Option<String>,
}

impl StructuredCapture {
    pub fn is_visual(&self) -> bool {
        self.scene_caption.is_some() || !self.objects.is_empty() || !self.visible_text.is_empty()
    }

    pub fn has_audio(&self) -> bool {
        !self.sound_classes.is_empty() || self.speech_transcript.is_some()
    }

    pub fn is_empty(&self) -> bool {
        !self.is_visual() && !self.has_audio()
    }

    pub fn has_family(&self, family: Family) -> bool {
        match family {
            Family::Visual => self.is_visual(),
            Family::Audio => self.has_audio(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Labels {
    pub target: TargetModality,
    pub specific_actions: Vec<SpecificAction>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub goal_reason: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cot: Option<String>,
}

impl Labels {
    /// Deduplicated parents of the specific labels, in first-seen order.
    pub fn general_actions(&self) -> Vec<GeneralAction> {
        let mut out = Vec::new();
        for s in &self.specific_actions {
            let g = s.general();
            if !out.contains(&g) {
                out.push(g);
            }
        }
        out
    }

    pub fn actions(&self, level: Level) -> Vec<ActionLabel> {
        match level {
            Level::General => self
                .general_actions()
                .into_iter()
                .map(ActionLabel::General)
                .collect(),
            Level::Specific => self
                .specific_actions
                .iter()
                .copied()
                .map(ActionLabel::Specific)
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiaryEntry {
    pub id: String,
    pub capture: StructuredCapture,
    pub context: ContextInfo,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<Labels>,
}

impl DiaryEntry {
    /// Visual if any visual field is populated, audio otherwise.
    pub fn kind(&self) -> Family {
        if self.capture.is_visual() {
            Family::Visual
        } else {
            Family::Audio
        }
    }

    pub fn labels(&self) -> Result<&Labels, CorpusError> {
        self.labels
            .as_ref()
            .ok_or_else(|| CorpusError::UnlabeledEntry(self.id.clone()))
    }

    /// Checks the invariants that do not depend on other entries.
    pub fn validate(&self, line: usize) -> Result<(), CorpusError> {
        if self.id.trim().is_empty() {
            return Err(CorpusError::schema(line, "id", "must be non-empty"));
        }
        check_present(line, "capture.scene_caption", &self.capture.scene_caption)?;
        check_present(line, "capture.speech_transcript", &self.capture.speech_transcript)?;
        check_present(line, "context.location", &self.context.location)?;
        check_present(line, "context.activity", &self.context.activity)?;
        for (field, items) in [
            ("capture.objects", &self.capture.objects),
            ("capture.visible_text", &self.capture.visible_text),
            ("capture.sound_classes", &self.capture.sound_classes),
        ] {
            if items.iter().any(|s| s.trim().is_empty()) {
                return Err(CorpusError::schema(line, field, "contains an empty string"));
            }
        }
        if self.capture.is_empty() {
            return Err(CorpusError::schema(line, "capture", "no field is populated"));
        }
        if let Some(labels) = &self.labels {
            let n = labels.specific_actions.len();
            if n == 0 || n > MAX_ACTIONS {
                return Err(CorpusError::schema(
                    line,
                    "labels.specific_actions",
                    format!("expected 1..={MAX_ACTIONS} actions, found {n}"),
                ));
            }
            let distinct: HashSet<_> = labels.specific_actions.iter().collect();
            if distinct.len() != n {
                return Err(CorpusError::schema(
                    line,
                    "labels.specific_actions",
                    "contains a repeated action",
                ));
            }
            let family = labels.target.family();
            if !self.capture.has_family(family) {
                return Err(CorpusError::schema(
                    line,
                    "labels.target",
                    format!("{} target without {} capture content", labels.target, family),
                ));
            }
            check_present(line, "labels.goal_reason", &labels.goal_reason)?;
            check_present(line, "labels.cot", &labels.cot)?;
        }
        Ok(())
    }
}

fn check_present(line: usize, field: &str, value: &Option<String>) -> Result<(), CorpusError> {
    match value {
        Some(s) if s.trim().is_empty() => Err(CorpusError::schema(
            line,
            field,
            "empty string; omit the field instead",
        )),
        _ => Ok(()),
    }
}

fn opt_string(obj: &serde_json::Map<String, Value>, key: &str, path: &str, line: usize) -> Result<Option<String>, CorpusError> {
    match obj.get(key) {
        None | Some(Value::Null) => Ok(None),
        Some(Value::String(s)) => Ok(Some(s.clone())),
        Some(_) => Err(CorpusError::schema(line, path, "expected a string")),
    }
}

fn string_list(obj: &serde_json::Map<String, Value>, key: &str, path: &str, line: usize) -> Result<Vec<String>, CorpusError> {
    match obj.get(key) {
        None | Some(Value::Null) => Ok(Vec::new()),
        Some(Value::Array(items)) => items
            .iter()
            .map(|v| {
                v.as_str()
                    .map(String::from)
                    .ok_or_else(|| CorpusError::schema(line, path, "expected an array of strings"))
            })
            .collect(),
        Some(_) => Err(CorpusError::schema(line, path, "expected an array of strings")),
    }
}

fn object<'a>(value: &'a Value, path: &str, line: usize) -> Result<&'a serde_json::Map<String, Value>, CorpusError> {
    value
        .as_object()
        .ok_or_else(|| CorpusError::schema(line, path, "expected an object"))
}

fn reject_unknown(obj: &serde_json::Map<String, Value>, known: &[&str], prefix: &str, line: usize) -> Result<(), CorpusError> {
    match obj.keys().find(|k| !known.contains(&k.as_str())) {
        Some(k) => {
            let path = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
            Err(CorpusError::schema(line, &path, "unknown field"))
        }
        None => Ok(()),
    }
}

/// Parses one JSONL record. `line` is 1-based and only used for errors.
pub fn parse_entry(text: &str, line: usize) -> Result<DiaryEntry, CorpusError> {
    let value: Value = serde_json::from_str(text)
        .map_err(|e| CorpusError::schema(line, "<json>", e.to_string()))?;
    let root = object(&value, "<root>", line)?;
    reject_unknown(root, &["id", "capture", "context", "labels"], "", line)?;

    let id = match root.get("id") {
        Some(Value::String(s)) => s.clone(),
        Some(_) => return Err(CorpusError::schema(line, "id", "expected a string")),
        None => return Err(CorpusError::schema(line, "id", "missing")),
    };

    let capture_value = root
        .get("capture")
        .ok_or_else(|| CorpusError::schema(line, "capture", "missing"))?;
    let cap = object(capture_value, "capture", line)?;
    reject_unknown(
        cap,
        &["scene_caption", "objects", "visible_text", "sound_classes", "speech_transcript"],
        "capture",
        line,
    )?;
    let capture = StructuredCapture {
        scene_caption: opt_string(cap, "scene_caption", "capture.scene_caption", line)?,
        objects: string_list(cap, "objects", "capture.objects", line)?,
        visible_text: string_list(cap, "visible_text", "capture.visible_text", line)?,
        sound_classes: string_list(cap, "sound_classes", "capture.sound_classes", line)?,
        speech_transcript: opt_string(cap, "speech_transcript", "capture.speech_transcript", line)?,
    };

    let context = match root.get("context") {
        None | Some(Value::Null) => ContextInfo::default(),
        Some(v) => {
            let ctx = object(v, "context", line)?;
            reject_unknown(ctx, &["location", "activity"], "context", line)?;
            ContextInfo {
                location: opt_string(ctx, "location", "context.location", line)?,
                activity: opt_string(ctx, "activity", "context.activity", line)?,
            }
        }
    };

    let labels = match root.get("labels") {
        None | Some(Value::Null) => None,
        Some(v) => {
            let lab = object(v, "labels", line)?;
            reject_unknown(
                lab,
                &["target", "specific_actions", "goal_reason", "cot"],
                "labels",
                line,
            )?;
            let target_raw = match lab.get("target") {
                Some(Value::String(s)) => s,
                Some(_) => return Err(CorpusError::schema(line, "labels.target", "expected a string")),
                None => return Err(CorpusError::schema(line, "labels.target", "missing")),
            };
            let target = TargetModality::from_str(target_raw).map_err(|_| {
                CorpusError::LabelOutsideTaxonomy {
                    line,
                    raw: target_raw.clone(),
                }
            })?;
            if !lab.contains_key("specific_actions") {
                return Err(CorpusError::schema(line, "labels.specific_actions", "missing"));
            }
            let raw_actions =
                string_list(lab, "specific_actions", "labels.specific_actions", line)?;
            let mut specific_actions = Vec::with_capacity(raw_actions.len());
            for raw in raw_actions {
                match normalize_label(&raw, Level::Specific) {
                    Ok(ActionLabel::Specific(s)) => specific_actions.push(s),
                    _ => return Err(CorpusError::LabelOutsideTaxonomy { line, raw }),
                }
            }
            Some(Labels {
                target,
                specific_actions,
                goal_reason: opt_string(lab, "goal_reason", "labels.goal_reason", line)?,
                cot: opt_string(lab, "cot", "labels.cot", line)?,
            })
        }
    };

    let entry = DiaryEntry {
        id,
        capture,
        context,
        labels,
    };
    entry.validate(line)?;
    Ok(entry)
}

/// Parses and validates a JSONL corpus. Blank lines are skipped.
pub fn parse_corpus(text: &str) -> Result<Vec<DiaryEntry>, CorpusError> {
    let mut seen = HashSet::new();
    let mut entries = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let entry = parse_entry(line, idx + 1)?;
        if !seen.insert(entry.id.clone()) {
            return Err(CorpusError::DuplicateId(entry.id));
        }
        entries.push(entry);
    }
    Ok(entries)
}

pub fn load_corpus(path: impl AsRef<Path>) -> Result<Vec<DiaryEntry>, CorpusError> {
    let text = std::fs::read_to_string(path)?;
    parse_corpus(&text)
}

/// Canonical JSONL form: one entry per line, trailing newline.
pub fn to_jsonl(entries: &[DiaryEntry]) -> String {
    let mut out = String::new();
    for e in entries {
        out.push_str(&serde_json::to_string(e).expect("entries serialize"));
        out.push('\n');
    }
    out
}

pub fn save_corpus(path: impl AsRef<Path>, entries: &[DiaryEntry]) -> Result<(), CorpusError> {
    std::fs::write(path, to_jsonl(entries))?;
    Ok(())
}

/// Which explicit context fields go into the structured-text tuple.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContextVariant {
    #[serde(rename = "none")]
    NoContext,
    LocationOnly,
    ActivityOnly,
    Full,
}

impl ContextVariant {
    pub const ALL: [ContextVariant; 4] = [
        ContextVariant::NoContext,
        ContextVariant::LocationOnly,
        ContextVariant::ActivityOnly,
        ContextVariant::Full,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ContextVariant::NoContext => "none",
            ContextVariant::LocationOnly => "location_only",
            ContextVariant::ActivityOnly => "activity_only",
            ContextVariant::Full => "full",
        }
    }

    pub fn includes_location(self) -> bool {
        matches!(self, ContextVariant::LocationOnly | ContextVariant::Full)
    }

    pub fn includes_activity(self) -> bool {
        matches!(self, ContextVariant::ActivityOnly | ContextVariant::Full)
    }
}

impl fmt::Display for ContextVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ContextVariant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match crate::taxonomy::fold(s).as_str() {
            "none" | "nocontext" => Ok(ContextVariant::NoContext),
            "location" | "locationonly" => Ok(ContextVariant::LocationOnly),
            "activity" | "activityonly" => Ok(ContextVariant::ActivityOnly),
            "full" => Ok(ContextVariant::Full),
            _ => Err(format!(
                "unknown context variant {s:?} (expected none, location, activity or full)"
            )),
        }
    }
}

/// Renders an entry as the structured-text tuple used as model input.
///
/// Keys appear in the fixed order scene_description, objects, visible_text,
/// sounds, speech, location, activity. Visual keys are emitted only for
/// visual captures and audio keys only when audio content exists.
pub fn format_tuple(capture: &StructuredCapture, context: &ContextInfo, variant: ContextVariant) -> String {
    fn push(out: &mut String, key: &str, value: &impl Serialize) {
        if out.len() > 1 {
            out.push(',');
        }
        out.push_str(&serde_json::to_string(key).expect("string serializes"));
        out.push(':');
        out.push_str(&serde_json::to_string(value).expect("value serializes"));
    }

    let mut out = String::from("{");
    if capture.is_visual() {
        if let Some(caption) = &capture.scene_caption {
            push(&mut out, "scene_description", caption);
        }
        push(&mut out, "objects", &capture.objects);
        push(&mut out, "visible_text", &capture.visible_text);
    }
    if capture.has_audio() {
        push(&mut out, "sounds", &capture.sound_classes);
        if let Some(speech) = &capture.speech_transcript {
            push(&mut out, "speech", speech);
        }
    }
    if variant.includes_location() {
        if let Some(loc) = &context.location {
            push(&mut out, "location", loc);
        }
    }
    if variant.includes_activity() {
        if let Some(act) = &context.activity {
            push(&mut out, "activity", act);
        }
    }
    out.push('}');
    out
}

impl DiaryEntry {
    pub fn tuple(&self, variant: ContextVariant) -> String {
        format_tuple(&self.capture, &self.context, variant)
    }
}

/// Summary statistics of a labeled corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub entries: usize,
    pub target_counts: BTreeMap<TargetModality, usize>,
    pub general_counts: BTreeMap<GeneralAction, usize>,
    pub specific_counts: BTreeMap<SpecificAction, usize>,
    /// Entries containing the action divided by the number of entries.
    pub general_frequency: BTreeMap<GeneralAction, f64>,
    pub specific_frequency: BTreeMap<SpecificAction, f64>,
    /// Number of entries per action count (1..=4).
    pub action_count_histogram: BTreeMap<usize, usize>,
    pub visual_entries: usize,
    pub audio_only_entries: usize,
    pub visual_audio_ratio: Option<f64>,
}

fn zeroed<L: TaxonomyLabel>() -> BTreeMap<L, usize> {
    L::all().iter().map(|&l| (l, 0)).collect()
}

fn top_n<L: TaxonomyLabel>(counts: &BTreeMap<L, usize>, n: usize) -> Vec<L> {
    let mut ranked: Vec<(L, usize)> = counts.iter().map(|(&l, &c)| (l, c)).collect();
    // Stable sort keeps canonical order among equal counts.
    ranked.sort_by_key(|e| std::cmp::Reverse(e.1));
    ranked.into_iter().take(n).map(|(l, _)| l).collect()
}

impl CorpusStats {
    pub fn top_general(&self, n: usize) -> Vec<GeneralAction> {
        top_n(&self.general_counts, n)
    }

    pub fn top_specific(&self, n: usize) -> Vec<SpecificAction> {
        top_n(&self.specific_counts, n)
    }

    pub fn top_actions(&self, level: Level, n: usize) -> Vec<ActionLabel> {
        match level {
            Level::General => self.top_general(n).into_iter().map(ActionLabel::General).collect(),
            Level::Specific => self.top_specific(n).into_iter().map(ActionLabel::Specific).collect(),
        }
    }

    /// Most frequent target modality within `family`, ties by canonical order.
    pub fn top_target(&self, family: Family) -> TargetModality {
        let mut best = family.modalities()[0];
        for &m in family.modalities() {
            if self.target_counts[&m] > self.target_counts[&best] {
                best = m;
            }
        }
        best
    }
}

pub fn compute_stats(corpus: &[DiaryEntry]) -> Result<CorpusStats, CorpusError> {
    let mut target_counts = zeroed::<TargetModality>();
    let mut general_counts = zeroed::<GeneralAction>();
    let mut specific_counts = zeroed::<SpecificAction>();
    let mut histogram: BTreeMap<usize, usize> = (1..=MAX_ACTIONS).map(|k| (k, 0)).collect();
    let mut visual = 0;
    for entry in corpus {
        let labels = entry.labels()?;
        *target_counts.get_mut(&labels.target).expect("all modalities present") += 1;
        for s in &labels.specific_actions {
            *specific_counts.get_mut(s).expect("all actions present") += 1;
        }
        for g in labels.general_actions() {
            *general_counts.get_mut(&g).expect("all actions present") += 1;
        }
        *histogram.entry(labels.specific_actions.len()).or_insert(0) += 1;
        if entry.capture.is_visual() {
            visual += 1;
        }
    }
    let total = corpus.len();
    let freq = |c: usize| if total == 0 { 0.0 } else { c as f64 / total as f64 };
    let audio_only = total - visual;
    Ok(CorpusStats {
        entries: total,
        general_frequency: general_counts.iter().map(|(&k, &v)| (k, freq(v))).collect(),
        specific_frequency: specific_counts.iter().map(|(&k, &v)| (k, freq(v))).collect(),
        target_counts,
        general_counts,
        specific_counts,
        action_count_histogram: histogram,
        visual_entries: visual,
        audio_only_entries: audio_only,
        visual_audio_ratio: (audio_only > 0).then(|| visual as f64 / audio_only as f64),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn menu_entry() -> DiaryEntry {
        DiaryEntry {
            id: "m1".into(),
            capture: StructuredCapture {
                scene_caption: Some("a menu board".into()),
                ..Default::default()
            },
            context: ContextInfo::new(Some("cafe"), Some("waiting")),
            labels: Some(Labels {
                target: TargetModality::Text,
                specific_actions: vec![SpecificAction::ShareWithOthers],
                goal_reason: None,
                cot: None,
            }),
        }
    }

    fn audio_entry() -> DiaryEntry {
        DiaryEntry {
            id: "a1".into(),
            capture: StructuredCapture {
                sound_classes: vec!["Music".into()],
                speech_transcript: Some("next stop is Main Street".into()),
                ..Default::default()
            },
            context: ContextInfo::new(Some("bus"), None),
            labels: Some(Labels {
                target: TargetModality::Speech,
                specific_actions: vec![SpecificAction::Remind],
                goal_reason: None,
                cot: None,
            }),
        }
    }

    #[test]
    fn tuple_full_and_none() {
        let e = menu_entry();
        assert_eq!(
            e.tuple(ContextVariant::Full),
            r#"{"scene_description":"a menu board","objects":[],"visible_text":[],"location":"cafe","activity":"waiting"}"#
        );
        assert_eq!(
            e.tuple(ContextVariant::NoContext),
            r#"{"scene_description":"a menu board","objects":[],"visible_text":[]}"#
        );
        assert_eq!(
            e.tuple(ContextVariant::LocationOnly),
            r#"{"scene_description":"a menu board","objects":[],"visible_text":[],"location":"cafe"}"#
        );
        assert_eq!(
            e.tuple(ContextVariant::ActivityOnly),
            r#"{"scene_description":"a menu board","objects":[],"visible_text":[],"activity":"waiting"}"#
        );
    }

    #[test]
    fn tuple_audio_only() {
        let t = audio_entry().tuple(ContextVariant::Full);
        assert_eq!(
            t,
            r#"{"sounds":["Music"],"speech":"next stop is Main Street","location":"bus"}"#
        );
        assert!(!t.contains("scene_description") && !t.contains("objects"));
    }

    #[test]
    fn load_three_lines() {
        let text = to_jsonl(&[menu_entry(), audio_entry()]) + "\n" + &to_jsonl(&[DiaryEntry {
            id: "u1".into(),
            labels: None,
            ..menu_entry()
        }]);
        let corpus = parse_corpus(&text).unwrap();
        assert_eq!(corpus.len(), 3);
        assert!(corpus[2].labels.is_none());
    }

    #[test]
    fn five_actions_rejected() {
        let line = r#"{"id":"x","capture":{"scene_caption":"a desk"},"context":{},"labels":{"target":"scene","specific_actions":["Remember","SaveForReference","SaveToList","KeepTrack","Remind"]}}"#;
        match parse_corpus(line) {
            Err(CorpusError::SchemaError { line: 1, field, .. }) => {
                assert_eq!(field, "labels.specific_actions")
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unknown_action_rejected() {
        let line = r#"{"id":"x","capture":{"scene_caption":"a desk"},"context":{},"labels":{"target":"scene","specific_actions":["memorize"]}}"#;
        match parse_corpus(&format!("\n{line}")) {
            Err(CorpusError::LabelOutsideTaxonomy { line: 2, raw }) => assert_eq!(raw, "memorize"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn duplicate_id_rejected() {
        let text = to_jsonl(&[menu_entry(), menu_entry()]);
        assert!(matches!(parse_corpus(&text), Err(CorpusError::DuplicateId(id)) if id == "m1"));
    }

    #[test]
    fn schema_errors_name_the_field() {
        let cases = [
            (r#"{"capture":{"scene_caption":"x"}}"#, "id"),
            (r#"{"id":"x","capture":{}}"#, "capture"),
            (r#"{"id":"x","capture":{"objects":"cup"}}"#, "capture.objects"),
            (r#"{"id":"x","capture":{"scene_caption":"x"},"context":{"location":""}}"#, "context.location"),
            (r#"{"id":"x","capture":{"scene_caption":"x"},"extra":1}"#, "extra"),
            (
                r#"{"id":"x","capture":{"sound_classes":["Dog"]},"labels":{"target":"object","specific_actions":["Remember"]}}"#,
                "labels.target",
            ),
            ("not json", "<json>"),
        ];
        for (text, expected) in cases {
            match parse_corpus(text) {
                Err(CorpusError::SchemaError { field, .. }) => assert_eq!(field, expected, "{text}"),
                other => panic!("{text}: unexpected {other:?}"),
            }
        }
    }

    #[test]
    fn stats_frequency_and_histogram() {
        let mut b = menu_entry();
        b.id = "m2".into();
        let stats = compute_stats(&[menu_entry(), b]).unwrap();
        assert_eq!(stats.general_frequency[&GeneralAction::Share], 1.0);
        assert_eq!(stats.action_count_histogram[&1], 2);
        assert_eq!(stats.visual_audio_ratio, None);
    }

    #[test]
    fn stats_require_labels() {
        let mut e = menu_entry();
        e.labels = None;
        assert!(matches!(compute_stats(&[e]), Err(CorpusError::UnlabeledEntry(_))));
    }

    #[test]
    fn general_actions_are_derived() {
        let labels = Labels {
            target: TargetModality::Scene,
            specific_actions: vec![
                SpecificAction::ShareWithOthers,
                SpecificAction::ShareOnSocialMedia,
                SpecificAction::Remember,
            ],
            goal_reason: None,
            cot: None,
        };
        assert_eq!(
            labels.general_actions(),
            vec![GeneralAction::Share, GeneralAction::Save]
        );
    }
}
