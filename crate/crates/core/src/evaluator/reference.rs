//! Published accuracy figures (percent) for side-by-side display. These
//! come from the original diary study and its models; they are not
//! reproduced here and are never used as acceptance numbers.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::ReportKind;
use crate::taxonomy::Level;

pub const NOTE: &str = "reported in the original study, not reproduced";

/// Target-information accuracy: (approach, visual, audio).
pub const TARGET: [(&str, f64, f64); 3] = [
    ("Intent classification", 70.6, 92.3),
    ("In-context learning", 62.3, 90.1),
    ("Fine-tuning", 70.7, 90.9),
];

/// Follow-up action accuracy: (technique, general top-1..3, specific top-1..3).
pub const ACTIONS: [(&str, [f64; 3], [f64; 3]); 5] = [
    ("Dominant", [47.4, 61.3, 78.1], [39.3, 45.3, 54.8]),
    ("Intent classification", [46.0, 61.1, 83.1], [41.7, 40.6, 54.3]),
    ("Finetuning GPT-3.5", [57.7, 67.2, 84.9], [48.1, 50.2, 60.1]),
    ("ICL GPT-3.5", [57.9, 65.2, 78.6], [36.4, 40.1, 46.3]),
    ("ICL GPT-4", [60.3, 69.9, 94.3], [44.4, 52.9, 67.1]),
];

/// Context ablation: (rows audio only, visual only, all) x (none, location,
/// activity, full).
pub const ABLATION: [(&str, [f64; 4]); 3] = [
    ("Audio only", [47.5, 47.7, 59.7, 60.0]),
    ("Visual only", [55.1, 59.1, 67.5, 70.8]),
    ("All", [52.5, 55.2, 64.9, 67.1]),
];

/// Accuracy by ground-truth action count: 1, 2, 3, 4, pooled multi, all.
pub const ACTION_COUNT_GENERAL: [f64; 6] = [98.7, 91.2, 68.6, 87.5, 85.5, 94.3];
pub const ACTION_COUNT_SPECIFIC: [f64; 6] = [73.7, 64.1, 50.3, 79.2, 61.1, 67.1];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceBlock {
    pub note: String,
    pub target: Vec<(String, f64, f64)>,
    pub actions: Vec<(String, [f64; 3], [f64; 3])>,
    pub ablation: Vec<(String, [f64; 4])>,
    pub action_count_general: [f64; 6],
    pub action_count_specific: [f64; 6],
}

impl Default for ReferenceBlock {
    fn default() -> Self {
        ReferenceBlock {
            note: NOTE.to_string(),
            target: TARGET.iter().map(|&(n, v, a)| (n.to_string(), v, a)).collect(),
            actions: ACTIONS.iter().map(|&(n, g, s)| (n.to_string(), g, s)).collect(),
            ablation: ABLATION.iter().map(|&(n, r)| (n.to_string(), r)).collect(),
            action_count_general: ACTION_COUNT_GENERAL,
            action_count_specific: ACTION_COUNT_SPECIFIC,
        }
    }
}

impl ReferenceBlock {
    pub fn render(&self, kind: ReportKind, level: Level) -> String {
        let mut out = format!("reference accuracy (%), {}\n", self.note);
        match kind {
            ReportKind::Target => {
                let _ = writeln!(out, "{:<24} {:>7} {:>7}", "", "visual", "audio");
                for (n, v, a) in &self.target {
                    let _ = writeln!(out, "{n:<24} {v:>7.1} {a:>7.1}");
                }
            }
            ReportKind::Actions => {
                let _ = writeln!(out, "{:<24} {:>6} {:>6} {:>6}", level.to_string(), "top-1", "top-2", "top-3");
                for (n, g, s) in &self.actions {
                    let row = if level == Level::General { g } else { s };
                    let _ = writeln!(out, "{n:<24} {:>6.1} {:>6.1} {:>6.1}", row[0], row[1], row[2]);
                }
                let counts = if level == Level::General { &self.action_count_general } else { &self.action_count_specific };
                let _ = writeln!(
                    out,
                    "by action count (1, 2, 3, 4, 2+, all): {}",
                    counts.iter().map(|v| format!("{v:.1}")).collect::<Vec<_>>().join(", ")
                );
            }
            ReportKind::Ablation => {
                let _ = writeln!(out, "{:<12} {:>8} {:>8} {:>8} {:>8}", "", "none", "location", "activity", "full");
                for (n, r) in &self.ablation {
                    let _ = writeln!(out, "{n:<12} {:>8.1} {:>8.1} {:>8.1} {:>8.1}", r[0], r[1], r[2], r[3]);
                }
            }
        }
        out
    }
}
