//! Scoring contract and the built-in trainable scorer.
//!
//! A [`GenerativeScorer`] returns, for a source sentence and a target token
//! sequence, the teacher-forced conditional log-probability of every target
//! token. A template's score is the sum of those values.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

mod model;
mod tensor;
mod train;
pub mod vocab;

pub use model::{with_eos, Encoding, ModelConfig, Params, TinySeq2Seq, TENSOR_NAMES};
pub use tensor::Matrix;
pub use train::{
    fine_tune, fit, gradient, loss, scheduled_lr, AdamConfig, FineTuneStats, LossNormalization, OptimizerPreset,
    TrainConfig, TrainError, TrainStats, BART_PRESET, BERT_PRESET,
};
pub use vocab::Vocab;

/// Per-token log-probabilities of a target and their sum.
#[derive(Debug, Clone, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TokenScores {
    pub per_token: Vec<f64>,
    pub total: f64,
}

impl TokenScores {
    /// `total` is the left-to-right sum of `per_token`.
    pub fn from_per_token(per_token: Vec<f64>) -> Self {
        let total = per_token.iter().fold(0.0, |acc, x| acc + x);
        Self { per_token, total }
    }

    pub fn len(&self) -> usize {
        self.per_token.len()
    }

    pub fn is_empty(&self) -> bool {
        self.per_token.is_empty()
    }

    pub fn mean(&self) -> f64 {
        if self.per_token.is_empty() {
            0.0
        } else {
            self.total / self.per_token.len() as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ScoreError {
    InvalidModel(String),
    /// The scorer cannot serve requests yet (e.g. no handshake).
    NotReady(String),
    Transport { endpoint: String, message: String },
    Timeout { endpoint: String, ids: Vec<i64> },
    Malformed { id: Option<i64>, message: String },
    VersionMismatch { expected: u32, found: u32 },
    /// The remote backend reported a failure for a request.
    Backend { id: i64, message: String },
    /// Response violates the contract (wrong length, positive or non-finite values).
    Contract { id: i64, message: String },
}

impl fmt::Display for ScoreError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScoreError::InvalidModel(m) => write!(f, "invalid model: {m}"),
            ScoreError::NotReady(m) => write!(f, "scorer not ready: {m}"),
            ScoreError::Transport { endpoint, message } => write!(f, "transport error on {endpoint}: {message}"),
            ScoreError::Timeout { endpoint, ids } => write!(f, "timeout on {endpoint} waiting for ids {ids:?}"),
            ScoreError::Malformed { id, message } => match id {
                Some(id) => write!(f, "malformed response for id {id}: {message}"),
                None => write!(f, "malformed response: {message}"),
            },
            ScoreError::VersionMismatch { expected, found } => {
                write!(f, "protocol version mismatch: expected {expected}, found {found}")
            }
            ScoreError::Backend { id, message } => write!(f, "backend error for id {id}: {message}"),
            ScoreError::Contract { id, message } => write!(f, "response {id} violates the scoring contract: {message}"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for ScoreError {}

/// Conditional log-probability scorer for (source, target) token sequences.
///
/// Implementations must be deterministic for a fixed state, return exactly
/// one value per target token (each `<= 0`), and condition every position on
/// the gold target prefix.
pub trait GenerativeScorer {
    fn score_target(&self, source: &[String], target: &[String]) -> Result<TokenScores, ScoreError>;

    /// Scores several targets against the same source.
    fn score_targets(&self, source: &[String], targets: &[Vec<String>]) -> Result<Vec<TokenScores>, ScoreError> {
        targets.iter().map(|t| self.score_target(source, t)).collect()
    }
}

impl<T: GenerativeScorer + ?Sized> GenerativeScorer for &T {
    fn score_target(&self, source: &[String], target: &[String]) -> Result<TokenScores, ScoreError> {
        (**self).score_target(source, target)
    }

    fn score_targets(&self, source: &[String], targets: &[Vec<String>]) -> Result<Vec<TokenScores>, ScoreError> {
        (**self).score_targets(source, targets)
    }
}

impl<T: GenerativeScorer + ?Sized> GenerativeScorer for alloc::boxed::Box<T> {
    fn score_target(&self, source: &[String], target: &[String]) -> Result<TokenScores, ScoreError> {
        (**self).score_target(source, target)
    }

    fn score_targets(&self, source: &[String], targets: &[Vec<String>]) -> Result<Vec<TokenScores>, ScoreError> {
        (**self).score_targets(source, targets)
    }
}
