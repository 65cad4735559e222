//! Problem-space manipulations, the query-budgeted optimizer, attribution
//! of primary attacks and adversarial corpus augmentation.

pub mod attribution;
pub mod augment;
mod edit;
pub mod manipulations;
pub mod optimizer;
pub mod sinks;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use attribution::{attribute_primary_attacks, attribute_with_rerun, gains_by_manipulation, population_sigma, Attribution};
pub use augment::{augment_corpus, retraining_set, Augmented, DEFAULT_ADVERSARIAL_WEIGHT};
pub use sinks::form_sinks;
pub use manipulations::{apply_manipulation, ManipulationOutcome};
pub use optimizer::{optimize, AttackRun, OptimizerConfig, StageRecord};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ManipulationId {
    A1,
    A2,
    A3,
    A4,
    A5,
    A6,
    A7,
    A8,
    A9,
    A10,
    A11,
    A12,
    A13,
    A14,
    A15,
}

impl ManipulationId {
    pub const ALL: [ManipulationId; 15] = [
        ManipulationId::A1,
        ManipulationId::A2,
        ManipulationId::A3,
        ManipulationId::A4,
        ManipulationId::A5,
        ManipulationId::A6,
        ManipulationId::A7,
        ManipulationId::A8,
        ManipulationId::A9,
        ManipulationId::A10,
        ManipulationId::A11,
        ManipulationId::A12,
        ManipulationId::A13,
        ManipulationId::A14,
        ManipulationId::A15,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ManipulationId::A1 => "InjectIntElem",
            ManipulationId::A2 => "InjectIntElemFoot",
            ManipulationId::A3 => "InjectIntLinkElem",
            ManipulationId::A4 => "InjectExtElem",
            ManipulationId::A5 => "InjectExtElemFoot",
            ManipulationId::A6 => "UpdateForm",
            ManipulationId::A7 => "ObfuscateExtLinks",
            ManipulationId::A8 => "ObfuscateJS",
            ManipulationId::A9 => "InjectFakeCopyright",
            ManipulationId::A10 => "UpdateIntAnchors",
            ManipulationId::A11 => "UpdateHiddenDivs",
            ManipulationId::A12 => "UpdateHiddenButtons",
            ManipulationId::A13 => "UpdateHiddenInputs",
            ManipulationId::A14 => "UpdateTitle",
            ManipulationId::A15 => "UpdateIFrames",
        }
    }

    pub fn round_class(self) -> RoundClass {
        match self {
            ManipulationId::A1
            | ManipulationId::A2
            | ManipulationId::A3
            | ManipulationId::A4
            | ManipulationId::A5 => RoundClass::MR,
            _ => RoundClass::SR,
        }
    }
}

impl fmt::Display for ManipulationId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

impl FromStr for ManipulationId {
    type Err = AttackError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ManipulationId::ALL
            .into_iter()
            .find(|m| m.to_string().eq_ignore_ascii_case(s.trim()) || m.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| AttackError::UnknownManipulation(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RoundClass {
    SR,
    MR,
}

/// How injected or re-hidden content is kept off screen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum HidingStrategy {
    /// `hidden` attribute.
    #[default]
    S1,
    /// Inline `display:none`.
    S2,
    /// Class hidden by an injected stylesheet rule.
    S3,
    /// Wrapped in `<noscript>`.
    S4,
}

impl FromStr for HidingStrategy {
    type Err = AttackError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_uppercase().as_str() {
            "S1" => Ok(HidingStrategy::S1),
            "S2" => Ok(HidingStrategy::S2),
            "S3" => Ok(HidingStrategy::S3),
            "S4" => Ok(HidingStrategy::S4),
            other => Err(AttackError::UnknownStrategy(other.to_string())),
        }
    }
}

/// Shape of the decode-and-execute wrapper used by A8.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum ObfuscationStyle {
    /// Payload held in a variable: `var _p="...";eval(atob(_p));`
    #[default]
    Indirect,
    /// `eval(atob("..."))`
    Direct,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ManipulationParams {
    pub count: usize,
    pub strategy: HidingStrategy,
    pub obfuscation: ObfuscationStyle,
    pub seed: u64,
}

impl Default for ManipulationParams {
    fn default() -> Self {
        ManipulationParams { count: 3, strategy: HidingStrategy::S1, obfuscation: ObfuscationStyle::Indirect, seed: 0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manipulation {
    pub id: ManipulationId,
    pub params: ManipulationParams,
}

impl Manipulation {
    pub fn new(id: ManipulationId) -> Self {
        Manipulation { id, params: ManipulationParams::default() }
    }

    pub fn with_params(id: ManipulationId, params: ManipulationParams) -> Self {
        Manipulation { id, params }
    }
}

#[derive(Debug, Error)]
pub enum AttackError {
    #[error("page is not classified phishing (confidence {0:.3})")]
    NotPhishing(f64),
    #[error("no document has {0} among its primary attacks")]
    EmptySelection(ManipulationId),
    #[error("unknown manipulation {0:?}")]
    UnknownManipulation(String),
    #[error("unknown hiding strategy {0:?}")]
    UnknownStrategy(String),
    #[error("invalid optimizer configuration: {0}")]
    InvalidConfig(String),
    #[error("pipeline query failed: {0}")]
    Pipeline(String),
}
