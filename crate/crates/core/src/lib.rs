//! Phishing page detection over a parsed representation of actionable
//! HTML elements.
//!
//! Pages are parsed into [`ParsedDocument`]s, split into overlapping token
//! windows, scored chunk by chunk with a pluggable [`Scorer`], and
//! aggregated into a [`Verdict`]. Around that pipeline sit an adversarial
//! lab (manipulations, optimizer, attribution, retraining sets), an
//! explainer producing structured warnings, and an evasion profiler.

pub mod adversarial;
pub mod config;
pub mod corpus;
pub mod css;
pub mod detector;
pub mod encoding;
pub mod explainer;
pub mod html;
pub mod parser;
pub mod pipeline;
pub mod profiler;
pub mod rebind;
pub mod window;

pub use adversarial::{
    apply_manipulation, attribute_primary_attacks, augment_corpus, optimize, AttackError, AttackRun, HidingStrategy,
    Manipulation, ManipulationId, ManipulationParams, OptimizerConfig,
};
pub use config::{Config, ConfigError};
pub use detector::reference::{ReferenceModel, TrainConfig};
pub use detector::{classify_document, DecidedBy, DetectorError, Scorer, ScorerError, Verdict, DEFAULT_THRESHOLD};
pub use encoding::normalize_encodings;
pub use explainer::{build_warning, tag_importance, Codebook, ExplainableWarning, ExplainerError, TagImportance};
pub use parser::{parse_document, render_parsed_text, ParsedDocument, ParsedElement, PatchConfig, TagKind};
pub use pipeline::{LabeledPage, PipelineConfig};
pub use profiler::{profile, EvasionCategory, EvasionProfile};
pub use window::{make_windows, Chunk, Label, WindowConfig};
