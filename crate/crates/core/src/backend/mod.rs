//! Predictor backends.
//!
//! Every backend answers two questions: complete a chat bundle
//! ([`Backend::chat`]) and rank labels for a tuple ([`Backend::classify`]).
//! HTTP backends speak a chat-completions subset; the mock backend answers
//! from a keyword rule table or, for plumbing checks, from ground truth.

mod cache;
mod config;
mod http;
mod mock;

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::parser::PredictedLabel;
use crate::prompt::{PromptBundle, Purpose};
use crate::taxonomy::{
    normalize_label, ActionLabel, Family, GeneralAction, Level, SpecificAction, TargetModality,
    TaxonomyLabel,
};

pub use cache::{CacheKey, CachedBackend, ResponseCache};
pub use config::{build_backend, BackendConfig, BackendKind};
pub use http::HttpBackend;
pub use mock::{Condition, Fallback, MockBackend, Rule, RuleTable};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BackendError {
    #[error("request timed out")]
    Timeout,
    #[error("HTTP status {code}: {body}")]
    HttpStatus { code: u16, body: String },
    #[error("rate limited")]
    RateLimited,
    #[error("transport error: {0}")]
    Transport(String),
    #[error("malformed response: {0}")]
    MalformedResponse(String),
    #[error("backend does not support {0}")]
    Unsupported(&'static str),
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("completion {0:?} is outside the taxonomy")]
    UnknownLabelEmitted(String),
    #[error("rule table: {0}")]
    RuleParse(String),
    #[error("cache: {0}")]
    Cache(String),
    #[error("configuration: {0}")]
    Config(String),
}

/// Labels with scores, best first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedLabels {
    pub labels: Vec<(String, f64)>,
}

impl RankedLabels {
    pub fn names(&self) -> Vec<&str> {
        self.labels.iter().map(|(l, _)| l.as_str()).collect()
    }
}

/// Pluggable predictor. Implementations must be shareable across threads.
pub trait Backend: Send + Sync {
    fn model_name(&self) -> &str;

    /// Completes a chat bundle and returns the raw assistant text.
    fn chat(&self, bundle: &PromptBundle) -> Result<String, BackendError>;

    /// Ranks the labels of `space` for a structured-text tuple.
    fn classify(&self, tuple: &str, space: Purpose, n: usize) -> Result<RankedLabels, BackendError>;

    /// Largest number of requests the backend wants outstanding at once.
    fn max_in_flight(&self) -> usize {
        1
    }
}

impl<B: Backend + ?Sized> Backend for std::sync::Arc<B> {
    fn model_name(&self) -> &str {
        (**self).model_name()
    }

    fn chat(&self, bundle: &PromptBundle) -> Result<String, BackendError> {
        (**self).chat(bundle)
    }

    fn classify(&self, tuple: &str, space: Purpose, n: usize) -> Result<RankedLabels, BackendError> {
        (**self).classify(tuple, space, n)
    }

    fn max_in_flight(&self) -> usize {
        (**self).max_in_flight()
    }
}

/// Every label of a classification space, canonical order.
pub fn label_space(space: Purpose) -> Result<Vec<PredictedLabel>, BackendError> {
    Ok(match space {
        Purpose::ActionGeneral => GeneralAction::ALL
            .into_iter()
            .map(|g| PredictedLabel::Action(ActionLabel::General(g)))
            .collect(),
        Purpose::ActionSpecific => SpecificAction::ALL
            .into_iter()
            .map(|s| PredictedLabel::Action(ActionLabel::Specific(s)))
            .collect(),
        Purpose::TargetVisual | Purpose::TargetAudio => space
            .family()
            .expect("target purposes have a family")
            .modalities()
            .iter()
            .map(|&m| PredictedLabel::Target(m))
            .collect(),
        Purpose::CotGen => {
            return Err(BackendError::InvalidRequest("cot_gen is not a label space".into()))
        }
    })
}

/// Resolves a label name inside a classification space.
pub fn resolve_label(raw: &str, space: Purpose) -> Option<PredictedLabel> {
    match space {
        Purpose::ActionGeneral => normalize_label(raw, Level::General).ok().map(PredictedLabel::Action),
        Purpose::ActionSpecific => normalize_label(raw, Level::Specific).ok().map(PredictedLabel::Action),
        Purpose::TargetVisual => {
            TargetModality::normalize_in(raw, Family::Visual).ok().map(PredictedLabel::Target)
        }
        Purpose::TargetAudio => {
            TargetModality::normalize_in(raw, Family::Audio).ok().map(PredictedLabel::Target)
        }
        Purpose::CotGen => None,
    }
}

fn canonical_index(label: PredictedLabel) -> usize {
    match label {
        PredictedLabel::Action(ActionLabel::General(g)) => g.index(),
        PredictedLabel::Action(ActionLabel::Specific(s)) => s.index(),
        PredictedLabel::Target(t) => t.index(),
    }
}

/// Top-`n` labels by score; equal scores keep canonical taxonomy order.
///
/// Every name must resolve inside `space`; repeated labels keep their best
/// score.
pub fn rank_labels(space: Purpose, scores: &[(&str, f64)], n: usize) -> Result<RankedLabels, BackendError> {
    let size = label_space(space)?.len();
    if n == 0 || n > size {
        return Err(BackendError::InvalidRequest(format!(
            "requested {n} labels from a space of {size}"
        )));
    }
    let mut resolved: Vec<(PredictedLabel, f64)> = Vec::new();
    for &(raw, score) in scores {
        let label = resolve_label(raw, space)
            .ok_or_else(|| BackendError::UnknownLabelEmitted(raw.to_string()))?;
        match resolved.iter_mut().find(|(l, _)| *l == label) {
            Some(slot) => slot.1 = slot.1.max(score),
            None => resolved.push((label, score)),
        }
    }
    resolved.sort_by(|a, b| {
        b.1.total_cmp(&a.1)
            .then_with(|| canonical_index(a.0).cmp(&canonical_index(b.0)))
    });
    Ok(RankedLabels {
        labels: resolved
            .into_iter()
            .take(n)
            .map(|(l, s)| (l.canonical_name().to_string(), s))
            .collect(),
    })
}

/// Runs `f` over `items` with at most `max_in_flight` calls outstanding.
/// Results come back in input order regardless of completion order.
pub fn run_bounded<T, R, F>(items: &[T], max_in_flight: usize, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(usize, &T) -> R + Sync,
{
    let workers = max_in_flight.max(1).min(items.len());
    if workers <= 1 {
        return items.iter().enumerate().map(|(i, t)| f(i, t)).collect();
    }
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<R>>> = Mutex::new((0..items.len()).map(|_| None).collect());
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= items.len() {
                    break;
                }
                let r = f(i, &items[i]);
                slots.lock().expect("result slots poisoned")[i] = Some(r);
            });
        }
    });
    slots
        .into_inner()
        .expect("result slots poisoned")
        .into_iter()
        .map(|r| r.expect("every index is processed"))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_scores_keep_taxonomy_order() {
        let names: Vec<&str> = SpecificAction::ALL.iter().map(|s| s.canonical_name()).collect();
        let scores: Vec<(&str, f64)> = names.iter().rev().map(|n| (*n, 0.1)).collect();
        let ranked = rank_labels(Purpose::ActionSpecific, &scores, 3).unwrap();
        assert_eq!(ranked.names(), vec!["ShareOnSocialMedia", "ShareWithOthers", "Remember"]);
    }

    #[test]
    fn ranks_by_score() {
        let ranked = rank_labels(
            Purpose::ActionGeneral,
            &[("Share", 0.3), ("Save", 0.5), ("Look up", 0.2)],
            2,
        )
        .unwrap();
        assert_eq!(ranked.names(), vec!["Save", "Share"]);
        assert_eq!(ranked.labels[0].1, 0.5);
    }

    #[test]
    fn oversized_request_rejected() {
        assert!(matches!(
            rank_labels(Purpose::ActionSpecific, &[], 20),
            Err(BackendError::InvalidRequest(_))
        ));
        assert!(matches!(
            rank_labels(Purpose::TargetAudio, &[("scene", 1.0)], 1),
            Err(BackendError::UnknownLabelEmitted(_))
        ));
    }

    #[test]
    fn bounded_runner_preserves_order() {
        let items: Vec<u64> = (0..50).collect();
        let out = run_bounded(&items, 8, |i, &x| {
            std::thread::sleep(std::time::Duration::from_micros((50 - x) * 20));
            (i, x * 2)
        });
        assert_eq!(out, items.iter().map(|&x| (x as usize, x * 2)).collect::<Vec<_>>());
    }

    #[test]
    fn bounded_runner_respects_limit() {
        let live = AtomicUsize::new(0);
        let peak = AtomicUsize::new(0);
        let items: Vec<u32> = (0..40).collect();
        run_bounded(&items, 3, |_, _| {
            let now = live.fetch_add(1, Ordering::SeqCst) + 1;
            peak.fetch_max(now, Ordering::SeqCst);
            std::thread::sleep(std::time::Duration::from_millis(2));
            live.fetch_sub(1, Ordering::SeqCst);
        });
        assert!(peak.load(Ordering::SeqCst) <= 3);
    }
}
