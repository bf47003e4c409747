//! Context-aware follow-up action prediction.
//!
//! Multimodal captures are described as structured text, turned into
//! chain-of-thought prompts, answered by a pluggable backend, parsed back
//! onto a closed action taxonomy and scored with a multi-label full-match
//! metric.

pub mod backend;
pub mod corpus;
pub mod evaluator;
pub mod export;
pub mod parser;
pub mod prompt;
pub mod synth;
pub mod taxonomy;

pub use corpus::{
    compute_stats, format_tuple, load_corpus, parse_corpus, save_corpus, to_jsonl, ContextInfo,
    ContextVariant, CorpusError, CorpusStats, DiaryEntry, Labels, StructuredCapture,
};
pub use backend::{build_backend, Backend, BackendConfig, BackendError, BackendKind, MockBackend, RankedLabels};
pub use evaluator::{
    ablation_grid, eval_actions, eval_target, full_match_accuracy, EvalConfig, EvalError, EvalReport,
    ModalityFilter, SampleScore, Technique,
};
pub use export::{export_finetune_chat, export_finetune_legacy, generate_cots, CotFailure, ExportError, LegacyTask};
pub use parser::{parse_prediction, ParseError, PredictedLabel, Prediction, PredictionSet};
pub use prompt::{
    build_action_prompt, build_cot_generation_prompt, build_target_prompt, FewShotStore, PromptBundle,
    PromptError, Purpose,
};
pub use synth::{generate_synthetic, SynthConfig};
pub use taxonomy::{
    general_of, list_definitions, normalize_label, ActionDefinition, ActionLabel, Family,
    GeneralAction, Level, SpecificAction, TargetModality, TaxonomyError, TaxonomyLabel,
};
