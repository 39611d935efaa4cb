//! Chain scoring: the [`Scorer`] strategy trait, its built-in implementations
//! and the name-keyed [`ScorerRegistry`] that selects one at runtime.
//!
//! A scorer maps `(question, prefix, candidate)` to a real "relevant-side"
//! score for the whole sequence. Requests carry a [`Head`] tag so that
//! first-hop pairs and longer chains can be routed to different classifiers
//! by implementations that care; the built-in scorers ignore it.

mod constant;
mod lexical;
mod lookup;
mod registry;
mod remote;
mod tokenize;

pub use constant::ConstantScorer;
pub use lexical::{lexical_score, LexicalScorer};
pub use lookup::{LookupEntry, LookupFile, LookupKey, LookupScorer, LookupTable, DEFAULT_MISSING};
pub use registry::{ScorerFactory, ScorerOptions, ScorerRegistry};
pub use remote::{
    HealthBody, RemoteConfig, RemoteScorer, ScoreRequestBody, ScoreResponseBody, WireItem,
    WirePassage, SCORER_URL_ENV,
};
pub use tokenize::{
    assemble_sequence, tokenize, AssemblyConfig, AssemblyError, CLS_TOKEN, SEP_TOKEN,
};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::types::{Passage, Question};

/// Which classifier a sequence is routed to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Head {
    FirstHop,
    LaterHop,
}

impl Head {
    pub fn for_prefix_len(len: usize) -> Self {
        if len == 0 {
            Head::FirstHop
        } else {
            Head::LaterHop
        }
    }

    /// Wire encoding: 1 for the first-hop head, 2 for later hops.
    pub fn wire_id(self) -> u8 {
        match self {
            Head::FirstHop => 1,
            Head::LaterHop => 2,
        }
    }
}

/// One sequence to score.
#[derive(Debug, Clone)]
pub struct ScoreRequest<'a> {
    pub head: Head,
    pub question: &'a Question,
    pub prefix: Vec<&'a Passage>,
    pub candidate: &'a Passage,
}

impl<'a> ScoreRequest<'a> {
    /// Builds a request with the head implied by the prefix length.
    pub fn new(question: &'a Question, prefix: Vec<&'a Passage>, candidate: &'a Passage) -> Self {
        Self {
            head: Head::for_prefix_len(prefix.len()),
            question,
            prefix,
            candidate,
        }
    }

    pub fn is_consistent(&self) -> bool {
        self.head == Head::for_prefix_len(self.prefix.len())
    }
}

/// Score scale a scorer produces; decides the default stopping threshold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreProfile {
    /// Unbounded logits, as from a classification head.
    Logit,
    /// Scores in [0, 1].
    Unit,
}

impl ScoreProfile {
    pub fn default_threshold(self) -> f64 {
        match self {
            ScoreProfile::Logit => -1.0,
            ScoreProfile::Unit => 0.05,
        }
    }
}

#[derive(Debug, Error)]
pub enum ScoreError {
    #[error("candidate {0} has no tokens")]
    EmptyCandidate(String),
    #[error("request {index} has head {head:?} but a prefix of {prefix_len} passages")]
    InconsistentHead {
        index: usize,
        head: Head,
        prefix_len: usize,
    },
    #[error("scorer unavailable: {0}")]
    ScorerUnavailable(String),
    #[error("scorer returned {got} scores for {expected} requests")]
    LengthMismatch { expected: usize, got: usize },
    #[error("scorer returned a non-finite score at position {0}")]
    NonFinite(usize),
    #[error("unknown scorer `{0}`")]
    UnknownScorer(String),
    #[error("invalid scorer spec `{spec}`: {reason}")]
    InvalidSpec { spec: String, reason: String },
    #[error("softmax over an empty score list")]
    EmptyInput,
}

/// A chain scoring strategy.
pub trait Scorer: Send + Sync {
    /// Stable identifier recorded in run manifests.
    fn id(&self) -> String;

    fn profile(&self) -> ScoreProfile;

    /// Scores a batch; `result[i]` belongs to `requests[i]`.
    fn score_batch(&self, requests: &[ScoreRequest<'_>]) -> Result<Vec<f64>, ScoreError>;

    fn score(&self, request: &ScoreRequest<'_>) -> Result<f64, ScoreError> {
        let mut out = self.score_batch(std::slice::from_ref(request))?;
        out.pop().ok_or(ScoreError::LengthMismatch {
            expected: 1,
            got: 0,
        })
    }
}

/// Checks request consistency, delegates to the scorer and verifies the
/// response has one score per request.
pub fn score_batch(
    scorer: &dyn Scorer,
    requests: &[ScoreRequest<'_>],
) -> Result<Vec<f64>, ScoreError> {
    if requests.is_empty() {
        return Ok(Vec::new());
    }
    if let Some((index, r)) = requests
        .iter()
        .enumerate()
        .find(|(_, r)| !r.is_consistent())
    {
        return Err(ScoreError::InconsistentHead {
            index,
            head: r.head,
            prefix_len: r.prefix.len(),
        });
    }
    let scores = scorer.score_batch(requests)?;
    if scores.len() != requests.len() {
        return Err(ScoreError::LengthMismatch {
            expected: requests.len(),
            got: scores.len(),
        });
    }
    if let Some(i) = scores.iter().position(|s| s.is_nan()) {
        return Err(ScoreError::NonFinite(i));
    }
    Ok(scores)
}

/// Distribution over next passages from their logit scores (max-shifted softmax).
pub fn softmax_distribution(scores: &[f64]) -> Result<Vec<f64>, ScoreError> {
    let max = scores
        .iter()
        .copied()
        .max_by(f64::total_cmp)
        .ok_or(ScoreError::EmptyInput)?;
    let exps: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    Ok(exps.into_iter().map(|e| e / total).collect())
}
