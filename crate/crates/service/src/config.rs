use std::path::{Path, PathBuf};

use omniact_core::{BackendConfig, ContextVariant};
use serde::{Deserialize, Serialize};

use crate::server::ServiceError;

/// Service settings, read from TOML or JSON.
///
/// Relative paths resolve against the directory holding the config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ServiceConfig {
    #[serde(default)]
    pub backend: BackendConfig,
    /// Corpus loaded at startup; also the pool for exemplar selection.
    #[serde(default)]
    pub corpus: Option<PathBuf>,
    /// Write ingested entries back to `corpus`.
    #[serde(default)]
    pub persist_corpus: bool,
    /// Exemplar file (JSONL entries). Without it, exemplars are selected
    /// from the corpus.
    #[serde(default)]
    pub fewshots: Option<PathBuf>,
    #[serde(default = "default_log")]
    pub feedback_log: PathBuf,
    #[serde(default = "default_variant")]
    pub context_variant: ContextVariant,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

fn default_log() -> PathBuf {
    PathBuf::from("feedback.jsonl")
}

fn default_variant() -> ContextVariant {
    ContextVariant::Full
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig {
            backend: BackendConfig::mock(),
            corpus: None,
            persist_corpus: false,
            fewshots: None,
            feedback_log: default_log(),
            context_variant: default_variant(),
            base_dir: PathBuf::from("."),
        }
    }
}

impl ServiceConfig {
    pub fn from_toml(text: &str) -> Result<Self, ServiceError> {
        toml::from_str(text).map_err(|e| ServiceError::Config(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self, ServiceError> {
        serde_json::from_str(text).map_err(|e| ServiceError::Config(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ServiceError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| ServiceError::Config(format!("{}: {e}", path.display())))?;
        let mut config = if path.extension().is_some_and(|e| e == "json") {
            Self::from_json(&text)?
        } else {
            Self::from_toml(&text)?
        };
        config.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(config)
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }
}
