//! Wire types of the HTTP API.

use omniact_core::{ContextInfo, Family, GeneralAction, Level, StructuredCapture, TargetModality};
use serde::{Deserialize, Serialize};

fn default_level() -> Level {
    Level::Specific
}

fn default_n() -> usize {
    3
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PredictRequest {
    pub capture: StructuredCapture,
    #[serde(default)]
    pub context: ContextInfo,
    pub family: Family,
    #[serde(default = "default_level")]
    pub level: Level,
    #[serde(default = "default_n")]
    pub n: usize,
}

impl PredictRequest {
    /// Stable id: identical requests map to the same id.
    pub fn request_id(&self) -> String {
        use sha2::{Digest, Sha256};
        let canonical = serde_json::to_vec(self).expect("request serializes");
        hex::encode(&Sha256::digest(&canonical)[..8])
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TargetItem {
    pub modality: TargetModality,
    pub cot: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActionItem {
    pub label: String,
    /// `None` for general-level labels.
    pub general_parent: Option<String>,
    pub cot: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DesignAction {
    pub name: String,
    pub definition: String,
}

/// One general action with its specific children.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DesignGroup {
    pub name: String,
    pub definition: String,
    pub actions: Vec<DesignAction>,
}

/// The whole design space, grouped general to specific.
pub fn design_space() -> Vec<DesignGroup> {
    GeneralAction::ALL
        .into_iter()
        .map(|g| DesignGroup {
            name: g.canonical_name().to_string(),
            definition: g.description().to_string(),
            actions: g
                .children()
                .map(|s| DesignAction { name: s.canonical_name().to_string(), definition: s.description().to_string() })
                .collect(),
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PredictResponse {
    pub request_id: String,
    pub model: String,
    pub level: Level,
    pub target: TargetItem,
    pub actions: Vec<ActionItem>,
    pub more: Vec<DesignGroup>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeedbackAck {
    pub request_id: String,
    /// False when the same selection was already logged.
    pub logged: bool,
    pub in_shown: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestAck {
    pub ingested: usize,
    pub total: usize,
}
