//! HTTP front end for live follow-up action prediction.
//!
//! Serves predictions from a configured backend, the action taxonomy, a
//! correction feedback log and a small corpus store. Raw media reach the
//! pipeline through [`converter::ConverterPlugin`]s; only mock converters
//! ship here.

pub mod api;
pub mod config;
pub mod converter;
pub mod feedback;
pub mod server;

pub use api::{ActionItem, DesignGroup, PredictRequest, PredictResponse, TargetItem};
pub use config::ServiceConfig;
pub use converter::{AudioContextBuffer, AudioEvent, Conversion, ConverterError, ConverterPlugin, ConverterRegistry, RawDescriptor};
pub use feedback::{promotable_entries, read_log, FeedbackLog, FeedbackRecord, FeedbackRow};
pub use server::{router, serve, AppState, ServiceError};
