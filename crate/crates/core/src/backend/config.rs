use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{Backend, BackendError, CachedBackend, Fallback, HttpBackend, MockBackend, ResponseCache, RuleTable};
use crate::corpus::{compute_stats, load_corpus};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    HttpChat,
    LogprobClassifier,
    Mock,
}

/// Backend settings, read from TOML or JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BackendConfig {
    pub kind: BackendKind,
    #[serde(default)]
    pub endpoint: Option<String>,
    #[serde(default = "default_model")]
    pub model_name: String,
    #[serde(default)]
    pub temperature: f64,
    #[serde(default = "default_in_flight")]
    pub max_in_flight: usize,
    #[serde(default = "default_timeout")]
    pub timeout_secs: u64,
    #[serde(default = "default_retries")]
    pub retries: u32,
    #[serde(default = "default_backoff")]
    pub backoff_ms: u64,
    #[serde(default)]
    pub cache_dir: Option<PathBuf>,
    /// Mock rule table.
    #[serde(default)]
    pub rules: Option<PathBuf>,
    /// Mock in oracle mode: answers with this corpus' ground truth.
    #[serde(default)]
    pub oracle_corpus: Option<PathBuf>,
    /// Corpus whose label frequencies order the mock fallback.
    #[serde(default)]
    pub fallback_corpus: Option<PathBuf>,
}

fn default_model() -> String {
    "mock".into()
}
fn default_in_flight() -> usize {
    4
}
fn default_timeout() -> u64 {
    60
}
fn default_retries() -> u32 {
    2
}
fn default_backoff() -> u64 {
    500
}

impl Default for BackendConfig {
    fn default() -> Self {
        BackendConfig::mock()
    }
}

impl BackendConfig {
    pub fn mock() -> Self {
        BackendConfig {
            kind: BackendKind::Mock,
            endpoint: None,
            model_name: default_model(),
            temperature: 0.0,
            max_in_flight: default_in_flight(),
            timeout_secs: default_timeout(),
            retries: default_retries(),
            backoff_ms: default_backoff(),
            cache_dir: None,
            rules: None,
            oracle_corpus: None,
            fallback_corpus: None,
        }
    }

    pub fn from_toml(text: &str) -> Result<Self, BackendError> {
        let c: Self = toml::from_str(text).map_err(|e| BackendError::Config(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn from_json(text: &str) -> Result<Self, BackendError> {
        let c: Self = serde_json::from_str(text).map_err(|e| BackendError::Config(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, BackendError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| BackendError::Config(format!("{}: {e}", path.display())))?;
        if path.extension().is_some_and(|e| e == "json") {
            Self::from_json(&text)
        } else {
            Self::from_toml(&text)
        }
    }

    pub fn validate(&self) -> Result<(), BackendError> {
        if self.max_in_flight == 0 {
            return Err(BackendError::Config("max_in_flight must be at least 1".into()));
        }
        if !(0.0..=2.0).contains(&self.temperature) {
            return Err(BackendError::Config("temperature must be within [0, 2]".into()));
        }
        match self.kind {
            BackendKind::HttpChat | BackendKind::LogprobClassifier => {
                if self.endpoint.as_deref().is_none_or(|e| e.trim().is_empty()) {
                    return Err(BackendError::Config("endpoint is required for HTTP backends".into()));
                }
            }
            BackendKind::Mock => {
                if self.rules.is_some() && self.oracle_corpus.is_some() {
                    return Err(BackendError::Config("rules and oracle_corpus are exclusive".into()));
                }
            }
        }
        Ok(())
    }
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

/// Instantiates the configured backend. Relative paths resolve against
/// `base_dir`. A `cache_dir` wraps the result in a [`CachedBackend`].
pub fn build_backend(config: &BackendConfig, base_dir: &Path) -> Result<Arc<dyn Backend>, BackendError> {
    config.validate()?;
    let inner: Arc<dyn Backend> = match config.kind {
        BackendKind::HttpChat | BackendKind::LogprobClassifier => Arc::new(HttpBackend::new(
            config.kind,
            config.endpoint.as_deref().unwrap_or_default(),
            &config.model_name,
            config.temperature,
            Duration::from_secs(config.timeout_secs),
            config.retries,
            Duration::from_millis(config.backoff_ms),
            config.max_in_flight,
        )?),
        BackendKind::Mock => {
            if let Some(path) = &config.oracle_corpus {
                let corpus = load_corpus(resolve(base_dir, path))
                    .map_err(|e| BackendError::Config(e.to_string()))?;
                Arc::new(MockBackend::oracle(&corpus)?.with_model_name(config.model_name.clone()))
            } else {
                let mut table = match &config.rules {
                    Some(path) => RuleTable::load(resolve(base_dir, path))?,
                    None => RuleTable::empty(),
                };
                if let Some(path) = &config.fallback_corpus {
                    let corpus = load_corpus(resolve(base_dir, path))
                        .map_err(|e| BackendError::Config(e.to_string()))?;
                    let stats = compute_stats(&corpus).map_err(|e| BackendError::Config(e.to_string()))?;
                    table = table.with_default_fallback(Fallback::from_stats(&stats));
                }
                Arc::new(MockBackend::rules(table).with_model_name(config.model_name.clone()))
            }
        }
    };
    Ok(match &config.cache_dir {
        Some(dir) => Arc::new(CachedBackend::new(inner, ResponseCache::disk(resolve(base_dir, dir))?)),
        None => inner,
    })
}
