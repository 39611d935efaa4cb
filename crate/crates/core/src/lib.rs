//! Multi-hop passage-chain retrieval by beam search.
//!
//! Given a question and a small candidate set, [`beam::retrieve`] builds a
//! chain of passages hop by hop, keeping the `B` best partial chains at each
//! hop and scoring every extension with a pluggable [`scoring::Scorer`].
//! The crate also generates labeled training sequences ([`supervision`]),
//! ingests distractor-style QA datasets ([`dataset`]) and computes retrieval
//! metrics ([`eval`]).

pub mod beam;
pub mod cli;
pub mod dataset;
pub mod eval;
pub mod scoring;
pub mod supervision;
pub mod types;

pub use beam::{
    exhaustive_retrieve, expand, rerank_chains, retrieve, select_top, RankedChain, RetrievalResult,
    SearchConfig, SearchError, SearchMode, StopReason,
};
pub use scoring::{Scorer, ScorerRegistry};
pub use types::{
    validate_example, Beam, CandidateSet, ChainHypothesis, ExpansionSet, MultiHopExample, Passage,
    PassageId, Question,
};
