//! Append-only correction log and exemplar promotion.

use std::collections::HashSet;
use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use omniact_core::{
    ContextInfo, DiaryEntry, Labels, Level, SpecificAction, StructuredCapture, TargetModality,
};
use serde::{Deserialize, Serialize};

/// Client-side feedback on one served prediction.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeedbackRecord {
    pub request_id: String,
    pub shown: Vec<String>,
    /// May lie outside `shown` when picked from the full design space.
    pub selected: String,
    pub target_confirmed: TargetModality,
    #[serde(default)]
    pub timestamp: Option<String>,
}

/// One line of the log: the record with canonical labels plus the served
/// input, so promotion needs nothing but the log.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeedbackRow {
    pub request_id: String,
    pub level: Level,
    pub shown: Vec<String>,
    pub selected: String,
    pub in_shown: bool,
    pub target_confirmed: TargetModality,
    pub timestamp: String,
    pub capture: StructuredCapture,
    #[serde(default)]
    pub context: ContextInfo,
}

pub struct FeedbackLog {
    path: PathBuf,
    file: File,
    seen: HashSet<(String, String)>,
}

impl FeedbackLog {
    /// Opens (or creates) the log; rows already present count as seen.
    pub fn open(path: impl Into<PathBuf>) -> std::io::Result<Self> {
        let path = path.into();
        let seen = if path.exists() {
            read_log(&path)?.into_iter().map(|r| (r.request_id, r.selected)).collect()
        } else {
            HashSet::new()
        };
        let file = OpenOptions::new().create(true).append(true).open(&path)?;
        Ok(FeedbackLog { path, file, seen })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    /// Appends `row` unless the same (request, selection) was logged
    /// before. Returns whether a line was written.
    pub fn append(&mut self, row: &FeedbackRow) -> std::io::Result<bool> {
        let key = (row.request_id.clone(), row.selected.clone());
        if self.seen.contains(&key) {
            return Ok(false);
        }
        let mut line = serde_json::to_string(row).expect("rows serialize");
        line.push('\n');
        self.file.write_all(line.as_bytes())?;
        self.file.flush()?;
        self.seen.insert(key);
        Ok(true)
    }
}

pub fn read_log(path: impl AsRef<Path>) -> std::io::Result<Vec<FeedbackRow>> {
    let text = std::fs::read_to_string(path)?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| {
                std::io::Error::new(std::io::ErrorKind::InvalidData, format!("feedback line {}: {e}", i + 1))
            })
        })
        .collect()
}

/// Turns logged corrections into labeled entries, one per request.
///
/// Selections of the same request are merged in log order. Only
/// specific-level rows can be promoted; the returned strings explain every
/// request that was skipped.
pub fn promotable_entries(rows: &[FeedbackRow]) -> (Vec<DiaryEntry>, Vec<String>) {
    let mut order: Vec<&str> = Vec::new();
    for r in rows {
        if !order.contains(&r.request_id.as_str()) {
            order.push(&r.request_id);
        }
    }
    let mut entries = Vec::new();
    let mut skipped = Vec::new();
    for id in order {
        let group: Vec<&FeedbackRow> = rows.iter().filter(|r| r.request_id == id).collect();
        if group.iter().any(|r| r.level != Level::Specific) {
            skipped.push(format!("{id}: general-level feedback cannot be promoted"));
            continue;
        }
        let mut actions: Vec<SpecificAction> = Vec::new();
        for r in &group {
            match r.selected.parse::<SpecificAction>() {
                Ok(s) if !actions.contains(&s) => actions.push(s),
                Ok(_) => {}
                Err(_) => skipped.push(format!("{id}: unknown label {:?} ignored", r.selected)),
            }
        }
        let last = group.last().expect("group is non-empty");
        let entry = DiaryEntry {
            id: format!("fb-{id}"),
            capture: last.capture.clone(),
            context: last.context.clone(),
            labels: Some(Labels {
                target: last.target_confirmed,
                specific_actions: actions,
                goal_reason: None,
                cot: None,
            }),
        };
        match entry.validate(0) {
            Ok(()) => entries.push(entry),
            Err(e) => skipped.push(format!("{id}: {e}")),
        }
    }
    (entries, skipped)
}
