use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, RwLock};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use super::{Backend, BackendError, RankedLabels};
use crate::prompt::{PromptBundle, Purpose};

/// SHA-256 digest identifying one backend request.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CacheKey(String);

impl CacheKey {
    fn digest(parts: &[&str]) -> CacheKey {
        let mut h = Sha256::new();
        for p in parts {
            h.update((p.len() as u64).to_le_bytes());
            h.update(p.as_bytes());
        }
        CacheKey(hex::encode(h.finalize()))
    }

    pub fn for_chat(model: &str, bundle: &PromptBundle) -> CacheKey {
        let body = serde_json::to_string(bundle).expect("bundles serialize");
        CacheKey::digest(&["chat", model, bundle.purpose.as_str(), &body])
    }

    pub fn for_classify(model: &str, tuple: &str, space: Purpose, n: usize) -> CacheKey {
        CacheKey::digest(&["classify", model, space.as_str(), &n.to_string(), tuple])
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct CacheRecord {
    key: String,
    request: Value,
    response: Value,
    timestamp: u64,
}

/// Content-addressed response store: in memory, or one JSON file per key.
#[derive(Debug)]
pub enum ResponseCache {
    Memory(RwLock<HashMap<String, Value>>),
    Disk(PathBuf),
}

impl ResponseCache {
    pub fn memory() -> Self {
        ResponseCache::Memory(RwLock::new(HashMap::new()))
    }

    pub fn disk(dir: impl Into<PathBuf>) -> Result<Self, BackendError> {
        let dir = dir.into();
        std::fs::create_dir_all(&dir).map_err(|e| BackendError::Cache(e.to_string()))?;
        Ok(ResponseCache::Disk(dir))
    }

    fn path(dir: &Path, key: &CacheKey) -> PathBuf {
        dir.join(format!("{}.json", key.as_str()))
    }

    pub fn get(&self, key: &CacheKey) -> Option<Value> {
        match self {
            ResponseCache::Memory(map) => map.read().ok()?.get(key.as_str()).cloned(),
            ResponseCache::Disk(dir) => {
                let text = std::fs::read_to_string(Self::path(dir, key)).ok()?;
                let record: CacheRecord = serde_json::from_str(&text).ok()?;
                Some(record.response)
            }
        }
    }

    /// Stores a response. Concurrent writers of one key race benignly: the
    /// payloads are identical and the last rename wins.
    pub fn put(&self, key: &CacheKey, request: Value, response: Value) -> Result<(), BackendError> {
        match self {
            ResponseCache::Memory(map) => {
                map.write()
                    .map_err(|_| BackendError::Cache("lock poisoned".into()))?
                    .insert(key.as_str().to_string(), response);
                Ok(())
            }
            ResponseCache::Disk(dir) => {
                let record = CacheRecord {
                    key: key.as_str().to_string(),
                    request,
                    response,
                    timestamp: SystemTime::now()
                        .duration_since(UNIX_EPOCH)
                        .map(|d| d.as_secs())
                        .unwrap_or(0),
                };
                let text = serde_json::to_string_pretty(&record)
                    .map_err(|e| BackendError::Cache(e.to_string()))?;
                let tmp = dir.join(format!(
                    "{}.{:?}.tmp",
                    key.as_str(),
                    std::thread::current().id()
                ));
                std::fs::write(&tmp, text).map_err(|e| BackendError::Cache(e.to_string()))?;
                std::fs::rename(&tmp, Self::path(dir, key))
                    .map_err(|e| BackendError::Cache(e.to_string()))
            }
        }
    }
}

/// Wraps a backend with a response cache and counts the requests that
/// actually reach the inner backend.
pub struct CachedBackend {
    inner: Arc<dyn Backend>,
    cache: ResponseCache,
    requests: AtomicUsize,
    hits: AtomicUsize,
}

impl CachedBackend {
    pub fn new(inner: Arc<dyn Backend>, cache: ResponseCache) -> Self {
        CachedBackend { inner, cache, requests: AtomicUsize::new(0), hits: AtomicUsize::new(0) }
    }

    /// Requests forwarded to the inner backend.
    pub fn requests_issued(&self) -> usize {
        self.requests.load(Ordering::SeqCst)
    }

    pub fn cache_hits(&self) -> usize {
        self.hits.load(Ordering::SeqCst)
    }
}

impl Backend for CachedBackend {
    fn model_name(&self) -> &str {
        self.inner.model_name()
    }

    fn chat(&self, bundle: &PromptBundle) -> Result<String, BackendError> {
        let key = CacheKey::for_chat(self.model_name(), bundle);
        if let Some(Value::String(text)) = self.cache.get(&key) {
            self.hits.fetch_add(1, Ordering::SeqCst);
            return Ok(text);
        }
        self.requests.fetch_add(1, Ordering::SeqCst);
        let text = self.inner.chat(bundle)?;
        let request = serde_json::to_value(bundle).expect("bundles serialize");
        self.cache.put(&key, request, Value::String(text.clone()))?;
        Ok(text)
    }

    fn classify(&self, tuple: &str, space: Purpose, n: usize) -> Result<RankedLabels, BackendError> {
        let key = CacheKey::for_classify(self.model_name(), tuple, space, n);
        if let Some(v) = self.cache.get(&key) {
            if let Ok(ranked) = serde_json::from_value::<RankedLabels>(v) {
                self.hits.fetch_add(1, Ordering::SeqCst);
                return Ok(ranked);
            }
        }
        self.requests.fetch_add(1, Ordering::SeqCst);
        let ranked = self.inner.classify(tuple, space, n)?;
        let request = serde_json::json!({ "tuple": tuple, "space": space, "n": n });
        let response = serde_json::to_value(&ranked).expect("ranked labels serialize");
        self.cache.put(&key, request, response)?;
        Ok(ranked)
    }

    fn max_in_flight(&self) -> usize {
        self.inner.max_in_flight()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::MockBackend;
    use crate::corpus::ContextVariant;
    use crate::prompt::ChatMessage;

    fn bundle(text: &str) -> PromptBundle {
        PromptBundle {
            messages: vec![ChatMessage::system("s"), ChatMessage::user(text)],
            purpose: Purpose::ActionSpecific,
            n_predictions: Some(3),
            context_variant: ContextVariant::Full,
        }
    }

    #[test]
    fn keys_separate_on_any_difference() {
        let a = CacheKey::for_chat("m", &bundle("{}"));
        assert_eq!(a, CacheKey::for_chat("m", &bundle("{}")));
        assert_ne!(a, CacheKey::for_chat("m", &bundle("{ }")));
        assert_ne!(a, CacheKey::for_chat("other", &bundle("{}")));
        let mut general = bundle("{}");
        general.purpose = Purpose::ActionGeneral;
        assert_ne!(a, CacheKey::for_chat("m", &general));
    }

    #[test]
    fn second_call_hits_disk_cache() {
        let dir = tempfile::tempdir().unwrap();
        let inner: Arc<dyn Backend> = Arc::new(MockBackend::empty_rules());
        let first = CachedBackend::new(inner.clone(), ResponseCache::disk(dir.path()).unwrap());
        let b = bundle(r#"{"scene_description":"a dog"}"#);
        let text = first.chat(&b).unwrap();
        assert_eq!(first.requests_issued(), 1);

        let second = CachedBackend::new(inner, ResponseCache::disk(dir.path()).unwrap());
        assert_eq!(second.chat(&b).unwrap(), text);
        assert_eq!(second.requests_issued(), 0);
        assert_eq!(second.cache_hits(), 1);

        let record: Value = serde_json::from_str(
            &std::fs::read_to_string(
                dir.path().join(format!("{}.json", CacheKey::for_chat("mock", &b).as_str())),
            )
            .unwrap(),
        )
        .unwrap();
        assert!(record.get("request").is_some() && record.get("timestamp").is_some());
    }

    #[test]
    fn classify_is_cached() {
        let backend = CachedBackend::new(Arc::new(MockBackend::empty_rules()), ResponseCache::memory());
        let a = backend.classify("{}", Purpose::ActionGeneral, 3).unwrap();
        let b = backend.classify("{}", Purpose::ActionGeneral, 3).unwrap();
        assert_eq!(a, b);
        assert_eq!(backend.requests_issued(), 1);
    }
}
