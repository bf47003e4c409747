use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::Duration;

use log::{debug, warn};
use serde_json::{json, Value};

use super::{rank_labels, resolve_label, Backend, BackendError, BackendKind, RankedLabels};
use crate::export::LEGACY_SEPARATOR;
use crate::prompt::{PromptBundle, Purpose, Role};
use crate::taxonomy::fold;

/// Environment variable holding the bearer token.
pub const API_KEY_ENV: &str = "OMNIACT_API_KEY";

/// Client for chat-completions style HTTP endpoints.
pub struct HttpBackend {
    kind: BackendKind,
    endpoint: String,
    model: String,
    temperature: f64,
    retries: u32,
    backoff: Duration,
    max_in_flight: usize,
    api_key: Option<String>,
    client: reqwest::blocking::Client,
    attempts: AtomicUsize,
}

impl HttpBackend {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        kind: BackendKind,
        endpoint: &str,
        model: &str,
        temperature: f64,
        timeout: Duration,
        retries: u32,
        backoff: Duration,
        max_in_flight: usize,
    ) -> Result<Self, BackendError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| BackendError::Config(e.to_string()))?;
        Ok(HttpBackend {
            kind,
            endpoint: endpoint.trim_end_matches('/').to_string(),
            model: model.to_string(),
            temperature,
            retries,
            backoff,
            max_in_flight: max_in_flight.max(1),
            api_key: std::env::var(API_KEY_ENV).ok().filter(|k| !k.is_empty()),
            client,
            attempts: AtomicUsize::new(0),
        })
    }

    /// Total HTTP attempts made, retries included.
    pub fn attempts(&self) -> usize {
        self.attempts.load(Ordering::SeqCst)
    }

    fn post(&self, path: &str, body: &Value) -> Result<Value, BackendError> {
        let url = format!("{}{}", self.endpoint, path);
        let mut attempt = 0;
        loop {
            self.attempts.fetch_add(1, Ordering::SeqCst);
            let err = match self.post_once(&url, body) {
                Ok(v) => return Ok(v),
                Err(e) => e,
            };
            let retriable = match &err {
                BackendError::Timeout | BackendError::RateLimited | BackendError::Transport(_) => true,
                BackendError::HttpStatus { code, .. } => *code >= 500,
                _ => false,
            };
            if !retriable || attempt >= self.retries {
                return Err(err);
            }
            let delay = self.backoff * 2u32.saturating_pow(attempt);
            warn!("{url}: {err}; retrying in {delay:?}");
            std::thread::sleep(delay);
            attempt += 1;
        }
    }

    fn post_once(&self, url: &str, body: &Value) -> Result<Value, BackendError> {
        let mut req = self.client.post(url).json(body);
        if let Some(key) = &self.api_key {
            req = req.bearer_auth(key);
        }
        let resp = req.send().map_err(|e| {
            if e.is_timeout() {
                BackendError::Timeout
            } else {
                BackendError::Transport(e.to_string())
            }
        })?;
        let status = resp.status();
        if status.as_u16() == 429 {
            return Err(BackendError::RateLimited);
        }
        let text = resp.text().map_err(|e| {
            if e.is_timeout() {
                BackendError::Timeout
            } else {
                BackendError::Transport(e.to_string())
            }
        })?;
        if !status.is_success() {
            return Err(BackendError::HttpStatus { code: status.as_u16(), body: text });
        }
        debug!("{url}: {} bytes", text.len());
        serde_json::from_str(&text).map_err(|e| BackendError::MalformedResponse(e.to_string()))
    }
}

/// Maps top-token log-probabilities onto labels. A token matches a label
/// when it normalizes to it, or when it is a prefix of exactly one label
/// name (completions are tokenized, so the first token is often partial).
fn labels_from_logprobs(top: &serde_json::Map<String, Value>, space: Purpose) -> Vec<(String, f64)> {
    let candidates = super::label_space(space).unwrap_or_default();
    let mut out: Vec<(String, f64)> = Vec::new();
    for (token, lp) in top {
        let Some(lp) = lp.as_f64() else { continue };
        let key = fold(token);
        if key.is_empty() {
            continue;
        }
        let label = resolve_label(token, space).or_else(|| {
            let matches: Vec<_> = candidates
                .iter()
                .filter(|l| {
                    let names = match l {
                        crate::parser::PredictedLabel::Action(a) => {
                            vec![fold(a.canonical_name()), fold(a.prompt_label())]
                        }
                        crate::parser::PredictedLabel::Target(t) => vec![fold(t.canonical_name())],
                    };
                    names.iter().any(|n| n.starts_with(&key))
                })
                .collect();
            (matches.len() == 1).then(|| *matches[0])
        });
        if let Some(label) = label {
            let name = label.canonical_name().to_string();
            match out.iter_mut().find(|(n, _)| *n == name) {
                Some(slot) => slot.1 = slot.1.max(lp),
                None => out.push((name, lp)),
            }
        }
    }
    out
}

impl Backend for HttpBackend {
    fn model_name(&self) -> &str {
        &self.model
    }

    fn chat(&self, bundle: &PromptBundle) -> Result<String, BackendError> {
        if self.kind != BackendKind::HttpChat {
            return Err(BackendError::Unsupported("chat on a classifier endpoint"));
        }
        let messages: Vec<Value> = bundle
            .messages
            .iter()
            .map(|m| {
                let role = match m.role {
                    Role::System => "system",
                    Role::User => "user",
                    Role::Assistant => "assistant",
                };
                json!({ "role": role, "content": m.content })
            })
            .collect();
        let body = json!({
            "model": self.model,
            "temperature": self.temperature,
            "messages": messages,
        });
        let resp = self.post("/chat/completions", &body)?;
        resp.pointer("/choices/0/message/content")
            .and_then(Value::as_str)
            .map(String::from)
            .ok_or_else(|| BackendError::MalformedResponse("missing choices[0].message.content".into()))
    }

    fn classify(&self, tuple: &str, space: Purpose, n: usize) -> Result<RankedLabels, BackendError> {
        if self.kind != BackendKind::LogprobClassifier {
            return Err(BackendError::Unsupported("classification on a chat endpoint"));
        }
        // Validates n against the space before any network traffic.
        rank_labels(space, &[], n)?;
        let body = json!({
            "model": self.model,
            "prompt": format!("{tuple}{LEGACY_SEPARATOR}"),
            "max_tokens": 8,
            "temperature": self.temperature,
            "logprobs": n.clamp(5, 20),
        });
        let resp = self.post("/completions", &body)?;
        let mut scores = resp
            .pointer("/choices/0/logprobs/top_logprobs/0")
            .and_then(Value::as_object)
            .map(|top| labels_from_logprobs(top, space))
            .unwrap_or_default();
        if scores.is_empty() {
            let text = resp
                .pointer("/choices/0/text")
                .and_then(Value::as_str)
                .unwrap_or_default()
                .trim()
                .to_string();
            match resolve_label(&text, space) {
                Some(label) => scores.push((label.canonical_name().to_string(), 0.0)),
                None => return Err(BackendError::UnknownLabelEmitted(text)),
            }
        }
        let borrowed: Vec<(&str, f64)> = scores.iter().map(|(l, s)| (l.as_str(), *s)).collect();
        rank_labels(space, &borrowed, n)
    }

    fn max_in_flight(&self) -> usize {
        self.max_in_flight
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn logprob_tokens_map_to_labels() {
        let top: serde_json::Map<String, Value> = serde_json::from_str(
            r#"{" Search": -0.2, " Share": -1.5, " Sh": -3.0, " Rem": -2.0, " xyz": -0.1}"#,
        )
        .unwrap();
        let mut got = labels_from_logprobs(&top, Purpose::ActionGeneral);
        got.sort_by(|a, b| a.0.cmp(&b.0));
        assert_eq!(got, vec![("Remind".to_string(), -2.0), ("Share".to_string(), -1.5)]);
        let specific = labels_from_logprobs(&top, Purpose::ActionSpecific);
        assert!(specific.contains(&("SearchOnline".to_string(), -0.2)));
        // " Sh" is a prefix of two specific labels and " Rem" of two more.
        assert_eq!(specific.len(), 1);
    }

    #[test]
    fn unreachable_endpoint_retries_then_fails() {
        let listener = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap();
        drop(listener);
        let backend = HttpBackend::new(
            BackendKind::HttpChat,
            &format!("http://{addr}"),
            "m",
            0.0,
            Duration::from_millis(500),
            2,
            Duration::from_millis(1),
            1,
        )
        .unwrap();
        let bundle = PromptBundle {
            messages: vec![crate::prompt::ChatMessage::system("s")],
            purpose: Purpose::ActionSpecific,
            n_predictions: Some(3),
            context_variant: crate::corpus::ContextVariant::Full,
        };
        assert!(backend.chat(&bundle).is_err());
        assert_eq!(backend.attempts(), 3);
    }
}
