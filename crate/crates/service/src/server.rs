use std::collections::{HashMap, HashSet};
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::State;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use omniact_core::backend::{Backend, BackendError};
use omniact_core::prompt::{select_fewshots_actions, select_fewshots_target};
use omniact_core::{
    build_action_prompt, build_backend, build_target_prompt, compute_stats, general_of, list_definitions,
    load_corpus, normalize_label, parse_corpus, parse_prediction, save_corpus, ActionLabel, ContextInfo,
    ContextVariant, CorpusError, CorpusStats, DiaryEntry, FewShotStore, Level, PromptBundle, PromptError,
    Purpose, SpecificAction, GeneralAction, StructuredCapture, TargetModality,
};
use serde::de::DeserializeOwned;
use serde_json::json;
use thiserror::Error;
use tokio::sync::{Mutex, RwLock, Semaphore};

use crate::api::{design_space, ActionItem, FeedbackAck, IngestAck, PredictRequest, PredictResponse, TargetItem};
use crate::config::ServiceConfig;
use crate::converter::{Conversion, ConverterError, ConverterRegistry, RawDescriptor};
use crate::feedback::{FeedbackLog, FeedbackRecord, FeedbackRow};

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("bad request: {0}")]
    BadRequest(String),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error("unknown request_id {0:?}")]
    UnknownRequest(String),
    #[error("backend failure: {0}")]
    Backend(#[from] BackendError),
    #[error("no valid {purpose} prediction in model output")]
    Unparseable { purpose: Purpose, raw: String },
    #[error(transparent)]
    Converter(#[from] ConverterError),
    #[error("configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl IntoResponse for ServiceError {
    fn into_response(self) -> Response {
        let message = self.to_string();
        let (status, body) = match &self {
            ServiceError::BadRequest(_) => (StatusCode::BAD_REQUEST, json!({ "error": message })),
            ServiceError::Corpus(CorpusError::SchemaError { line, field, .. }) => {
                (StatusCode::BAD_REQUEST, json!({ "error": message, "line": line, "field": field }))
            }
            ServiceError::Corpus(CorpusError::LabelOutsideTaxonomy { line, raw }) => (
                StatusCode::BAD_REQUEST,
                json!({ "error": message, "line": line, "field": "labels", "value": raw }),
            ),
            ServiceError::Corpus(CorpusError::DuplicateId(id)) => {
                (StatusCode::BAD_REQUEST, json!({ "error": message, "field": "id", "value": id }))
            }
            ServiceError::Corpus(_) => (StatusCode::BAD_REQUEST, json!({ "error": message })),
            ServiceError::UnknownRequest(_) => (StatusCode::NOT_FOUND, json!({ "error": message })),
            ServiceError::Backend(_) => (StatusCode::BAD_GATEWAY, json!({ "error": message })),
            ServiceError::Unparseable { raw, .. } => {
                (StatusCode::UNPROCESSABLE_ENTITY, json!({ "error": message, "raw": raw }))
            }
            ServiceError::Converter(ConverterError::ConversionFailed { .. }) => {
                (StatusCode::UNPROCESSABLE_ENTITY, json!({ "error": message }))
            }
            ServiceError::Converter(_) => (StatusCode::BAD_REQUEST, json!({ "error": message })),
            ServiceError::Config(_) | ServiceError::Io(_) => {
                (StatusCode::INTERNAL_SERVER_ERROR, json!({ "error": message }))
            }
        };
        (status, Json(body)).into_response()
    }
}

/// What the service remembers about a served prediction.
#[derive(Debug, Clone)]
struct Served {
    level: Level,
    capture: StructuredCapture,
    context: ContextInfo,
}

pub struct AppState {
    backend: Arc<dyn Backend>,
    permits: Arc<Semaphore>,
    variant: ContextVariant,
    action_shots: Option<FewShotStore>,
    target_shots: Option<FewShotStore>,
    corpus: RwLock<Vec<DiaryEntry>>,
    corpus_path: Option<PathBuf>,
    served: RwLock<HashMap<String, Served>>,
    feedback: Mutex<FeedbackLog>,
    converters: ConverterRegistry,
}

impl AppState {
    pub fn from_config(config: &ServiceConfig) -> Result<Self, ServiceError> {
        let backend = build_backend(&config.backend, &config.base_dir)?;
        Self::with_backend(config, backend)
    }

    /// Like [`AppState::from_config`] but with an already built backend;
    /// the config's backend section is ignored.
    pub fn with_backend(config: &ServiceConfig, backend: Arc<dyn Backend>) -> Result<Self, ServiceError> {
        let corpus = match &config.corpus {
            Some(p) => load_corpus(config.resolve(p))?,
            None => Vec::new(),
        };
        let pool: Vec<DiaryEntry> = match &config.fewshots {
            Some(p) => load_corpus(config.resolve(p))?,
            None => corpus.iter().filter(|e| e.labels.is_some()).cloned().collect(),
        };
        let (action_shots, target_shots) = if pool.is_empty() {
            (None, None)
        } else if config.fewshots.is_some() {
            // An explicit exemplar file is used as is for both tasks.
            let store = FewShotStore::fixed(pool);
            (Some(store.clone()), Some(store))
        } else {
            let selection = select_fewshots_actions(&pool);
            if !selection.uncovered.is_empty() {
                log::warn!("exemplars leave actions uncovered: {:?}", selection.uncovered);
            }
            (Some(selection.store), select_fewshots_target(&pool).ok())
        };
        let feedback = FeedbackLog::open(config.resolve(&config.feedback_log))?;
        Ok(AppState {
            permits: Arc::new(Semaphore::new(backend.max_in_flight().max(1))),
            backend,
            variant: config.context_variant,
            action_shots,
            target_shots,
            corpus: RwLock::new(corpus),
            corpus_path: config.persist_corpus.then(|| config.corpus.as_ref().map(|p| config.resolve(p))).flatten(),
            served: RwLock::new(HashMap::new()),
            feedback: Mutex::new(feedback),
            converters: ConverterRegistry::with_mocks(),
        })
    }

    pub fn with_converters(mut self, converters: ConverterRegistry) -> Self {
        self.converters = converters;
        self
    }

    pub fn model_name(&self) -> &str {
        self.backend.model_name()
    }

    /// Runs one bundle on the backend in a blocking task, bounded by the
    /// backend's in-flight limit. Backends without chat support fall back
    /// to label scoring, which carries no reasoning text.
    async fn ask(&self, bundle: PromptBundle, n: usize) -> Result<String, ServiceError> {
        let permit = self.permits.clone().acquire_owned().await.expect("semaphore is never closed");
        let backend = self.backend.clone();
        tokio::task::spawn_blocking(move || {
            let _permit = permit;
            match backend.chat(&bundle) {
                Err(BackendError::Unsupported(_)) => {
                    let ranked = backend.classify(bundle.query(), bundle.purpose, n)?;
                    let items: Vec<serde_json::Value> = ranked
                        .names()
                        .into_iter()
                        .map(|name| json!({ bundle.purpose.cot_key(): "", "prediction": name }))
                        .collect();
                    Ok(match bundle.purpose.family() {
                        Some(_) => items.into_iter().next().unwrap_or_default().to_string(),
                        None => serde_json::Value::Array(items).to_string(),
                    })
                }
                other => other,
            }
        })
        .await
        .map_err(|e| ServiceError::Io(std::io::Error::other(e)))?
        .map_err(ServiceError::from)
    }
}

fn decode<T: DeserializeOwned>(body: &Bytes) -> Result<T, ServiceError> {
    serde_json::from_slice(body).map_err(|e| ServiceError::BadRequest(e.to_string()))
}

fn level_size(level: Level) -> usize {
    match level {
        Level::General => GeneralAction::ALL.len(),
        Level::Specific => SpecificAction::ALL.len(),
    }
}

async fn predict(State(state): State<Arc<AppState>>, body: Bytes) -> Result<Json<PredictResponse>, ServiceError> {
    let req: PredictRequest = decode(&body)?;
    if req.n == 0 || req.n > level_size(req.level) {
        return Err(ServiceError::BadRequest(format!(
            "n must be within 1..={} for {} actions",
            level_size(req.level),
            req.level
        )));
    }
    if !req.capture.has_family(req.family) {
        return Err(ServiceError::BadRequest(format!("capture has no {} content", req.family)));
    }
    let request_id = req.request_id();
    let entry = DiaryEntry {
        id: request_id.clone(),
        capture: req.capture.clone(),
        context: req.context.clone(),
        labels: None,
    };
    entry.validate(1)?;

    let prompt_err = |e: PromptError| ServiceError::BadRequest(e.to_string());
    let target_bundle = build_target_prompt(&entry, req.family, state.target_shots.as_ref()).map_err(prompt_err)?;
    let action_bundle = build_action_prompt(&entry, req.level, req.n, state.action_shots.as_ref(), state.variant)
        .map_err(prompt_err)?;

    // Independent calls: the action prediction never waits on the target.
    let (target_raw, action_raw) = tokio::join!(state.ask(target_bundle, 1), state.ask(action_bundle, req.n));
    let (target_raw, action_raw) = (target_raw?, action_raw?);

    let target_purpose = Purpose::for_family(req.family);
    let target = parse_prediction(&target_raw, target_purpose, 1)
        .ok()
        .and_then(|set| {
            set.predictions
                .into_iter()
                .find_map(|p| p.label.as_target().map(|modality| TargetItem { modality, cot: p.cot }))
        })
        .ok_or_else(|| ServiceError::Unparseable { purpose: target_purpose, raw: target_raw.clone() })?;

    let action_purpose = Purpose::for_level(req.level);
    let actions: Vec<ActionItem> = parse_prediction(&action_raw, action_purpose, req.n)
        .map(|set| {
            set.predictions
                .into_iter()
                .filter_map(|p| {
                    let label = p.label.as_action()?;
                    Some(ActionItem {
                        label: label.canonical_name().to_string(),
                        general_parent: match label {
                            ActionLabel::Specific(s) => Some(general_of(s).canonical_name().to_string()),
                            ActionLabel::General(_) => None,
                        },
                        cot: p.cot,
                    })
                })
                .collect()
        })
        .unwrap_or_default();
    if actions.is_empty() {
        return Err(ServiceError::Unparseable { purpose: action_purpose, raw: action_raw });
    }

    state.served.write().await.insert(
        request_id.clone(),
        Served { level: req.level, capture: req.capture, context: req.context },
    );
    Ok(Json(PredictResponse {
        request_id,
        model: state.model_name().to_string(),
        level: req.level,
        target,
        actions,
        more: design_space(),
    }))
}

async fn feedback(State(state): State<Arc<AppState>>, body: Bytes) -> Result<Json<FeedbackAck>, ServiceError> {
    let record: FeedbackRecord = decode(&body)?;
    let served = state
        .served
        .read()
        .await
        .get(&record.request_id)
        .cloned()
        .ok_or_else(|| ServiceError::UnknownRequest(record.request_id.clone()))?;
    let canonical = |raw: &str| {
        normalize_label(raw, served.level)
            .map(|l| l.canonical_name().to_string())
            .map_err(|e| ServiceError::BadRequest(e.to_string()))
    };
    let selected = canonical(&record.selected)?;
    let shown = record.shown.iter().map(|s| canonical(s)).collect::<Result<Vec<_>, _>>()?;
    let in_shown = shown.contains(&selected);
    let row = FeedbackRow {
        request_id: record.request_id.clone(),
        level: served.level,
        shown,
        selected,
        in_shown,
        target_confirmed: record.target_confirmed,
        timestamp: record.timestamp.unwrap_or_else(|| chrono::Utc::now().to_rfc3339()),
        capture: served.capture,
        context: served.context,
    };
    let logged = state.feedback.lock().await.append(&row)?;
    Ok(Json(FeedbackAck { request_id: record.request_id, logged, in_shown }))
}

async fn actions() -> Json<Vec<omniact_core::ActionDefinition>> {
    let mut all = list_definitions(Level::General);
    all.extend(list_definitions(Level::Specific));
    Json(all)
}

async fn stats(State(state): State<Arc<AppState>>) -> Result<Json<CorpusStats>, ServiceError> {
    let corpus = state.corpus.read().await;
    let labeled: Vec<DiaryEntry> = corpus.iter().filter(|e| e.labels.is_some()).cloned().collect();
    Ok(Json(compute_stats(&labeled)?))
}

/// Body: JSONL entries, validated like a corpus file.
async fn ingest(State(state): State<Arc<AppState>>, body: String) -> Result<Json<IngestAck>, ServiceError> {
    let incoming = parse_corpus(&body)?;
    let mut corpus = state.corpus.write().await;
    let existing: HashSet<&str> = corpus.iter().map(|e| e.id.as_str()).collect();
    if let Some(dup) = incoming.iter().find(|e| existing.contains(e.id.as_str())) {
        return Err(CorpusError::DuplicateId(dup.id.clone()).into());
    }
    let ingested = incoming.len();
    corpus.extend(incoming);
    if let Some(path) = &state.corpus_path {
        save_corpus(path, &corpus)?;
    }
    Ok(Json(IngestAck { ingested, total: corpus.len() }))
}

async fn convert(State(state): State<Arc<AppState>>, body: Bytes) -> Result<Json<Conversion>, ServiceError> {
    let raw: RawDescriptor = decode(&body)?;
    Ok(Json(state.converters.convert(&raw)?))
}

async fn targets() -> Json<Vec<serde_json::Value>> {
    Json(
        TargetModality::ALL
            .iter()
            .map(|m| json!({ "name": m.canonical_name(), "family": m.family(), "definition": m.description() }))
            .collect(),
    )
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/predict", post(predict))
        .route("/feedback", post(feedback))
        .route("/actions", get(actions))
        .route("/targets", get(targets))
        .route("/stats", get(stats))
        .route("/corpus", post(ingest))
        .route("/convert", post(convert))
        .with_state(state)
}

pub async fn serve(config: &ServiceConfig, addr: SocketAddr) -> Result<(), ServiceError> {
    let state = Arc::new(AppState::from_config(config)?);
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("serving {} on {}", state.model_name(), listener.local_addr()?);
    axum::serve(listener, router(state)).await?;
    Ok(())
}
