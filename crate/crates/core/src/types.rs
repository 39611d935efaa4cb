//! Shared domain vocabulary: passages, questions, chains and beams.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Opaque passage identifier, unique within a candidate set.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PassageId(pub String);

impl PassageId {
    pub fn new(id: impl Into<String>) -> Self {
        Self(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for PassageId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for PassageId {
    fn from(s: &str) -> Self {
        Self(s.to_string())
    }
}

impl From<String> for PassageId {
    fn from(s: String) -> Self {
        Self(s)
    }
}

/// Convenience for building id lists in tests and fixtures.
pub fn ids<I, S>(items: I) -> Vec<PassageId>
where
    I: IntoIterator<Item = S>,
    S: Into<String>,
{
    items.into_iter().map(|s| PassageId(s.into())).collect()
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ChainError {
    #[error("passage {0} is already part of the chain")]
    DuplicatePassage(PassageId),
    #[error("candidate set is empty")]
    EmptyCandidateSet,
    #[error("candidate id {0} appears more than once")]
    DuplicateCandidate(PassageId),
    #[error("candidate id is empty")]
    EmptyCandidateId,
    #[error("passage {0} is not in the candidate set")]
    UnknownPassage(PassageId),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Passage {
    pub id: PassageId,
    pub title: String,
    pub body: String,
}

impl Passage {
    pub fn new(id: impl Into<String>, title: impl Into<String>, body: impl Into<String>) -> Self {
        Self {
            id: PassageId(id.into()),
            title: title.into(),
            body: body.into(),
        }
    }
}

/// The `n` passages offered with one question.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct CandidateSet {
    passages: Vec<Passage>,
}

impl CandidateSet {
    /// Builds a candidate set, rejecting empty sets, empty ids and duplicate ids.
    pub fn new(passages: Vec<Passage>) -> Result<Self, ChainError> {
        if passages.is_empty() {
            return Err(ChainError::EmptyCandidateSet);
        }
        let mut seen = HashSet::new();
        for p in &passages {
            if p.id.0.is_empty() {
                return Err(ChainError::EmptyCandidateId);
            }
            if !seen.insert(&p.id) {
                return Err(ChainError::DuplicateCandidate(p.id.clone()));
            }
        }
        Ok(Self { passages })
    }

    /// Wraps passages without checking invariants; `validate_example` reports
    /// whatever is wrong with them.
    pub fn new_unchecked(passages: Vec<Passage>) -> Self {
        Self { passages }
    }

    pub fn len(&self) -> usize {
        self.passages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.passages.is_empty()
    }

    pub fn passages(&self) -> &[Passage] {
        &self.passages
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Passage> {
        self.passages.iter()
    }

    pub fn get(&self, id: &PassageId) -> Option<&Passage> {
        self.passages.iter().find(|p| &p.id == id)
    }

    pub fn contains(&self, id: &PassageId) -> bool {
        self.get(id).is_some()
    }

    /// Resolves an ordered id list into passages.
    pub fn resolve(&self, ids: &[PassageId]) -> Result<Vec<&Passage>, ChainError> {
        ids.iter()
            .map(|id| {
                self.get(id)
                    .ok_or_else(|| ChainError::UnknownPassage(id.clone()))
            })
            .collect()
    }

    pub fn into_passages(self) -> Vec<Passage> {
        self.passages
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Question {
    pub id: String,
    pub text: String,
}

impl Question {
    pub fn new(id: impl Into<String>, text: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            text: text.into(),
        }
    }
}

/// A labeled retrieval instance.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiHopExample {
    pub question: Question,
    pub candidates: CandidateSet,
    /// Ordered gold chain, when the source provides hop order.
    pub gold_chain: Option<Vec<PassageId>>,
    pub gold_set: BTreeSet<PassageId>,
    pub answer: Option<String>,
    pub hop_count: Option<usize>,
    /// Fields this engine does not interpret, carried through canonical rewrites.
    pub extra: BTreeMap<String, serde_json::Value>,
}

impl MultiHopExample {
    /// Number of gold hops: explicit count, else gold chain length, else gold set size.
    pub fn hops(&self) -> usize {
        self.hop_count
            .or_else(|| self.gold_chain.as_ref().map(Vec::len))
            .unwrap_or(self.gold_set.len())
    }
}

/// Checks every `MultiHopExample` invariant and returns one message per violation.
pub fn validate_example(example: &MultiHopExample) -> Vec<String> {
    let mut violations = Vec::new();

    if example.question.text.trim().is_empty() {
        violations.push("question text is empty".to_string());
    }
    if example.candidates.is_empty() {
        violations.push("candidate set is empty".to_string());
    }
    let mut seen = HashSet::new();
    for p in example.candidates.iter() {
        if p.id.0.is_empty() {
            violations.push("candidate id is empty".to_string());
        } else if !seen.insert(&p.id) {
            violations.push(format!("candidate id {} is duplicated", p.id));
        }
    }

    match &example.gold_chain {
        Some(chain) => {
            let mut chain_seen = HashSet::new();
            for id in chain {
                if !chain_seen.insert(id) {
                    violations.push(format!("gold_chain contains duplicate {id}"));
                }
                if !example.candidates.contains(id) {
                    violations.push(format!("gold passage {id} not in candidates"));
                }
            }
            let as_set: BTreeSet<_> = chain.iter().cloned().collect();
            if as_set != example.gold_set {
                violations.push("gold_set does not equal the elements of gold_chain".to_string());
            }
            if let Some(k) = example.hop_count {
                if k != chain.len() {
                    violations.push(format!(
                        "hop_count {k} does not match gold_chain length {}",
                        chain.len()
                    ));
                }
            }
        }
        None => {
            for id in &example.gold_set {
                if !example.candidates.contains(id) {
                    violations.push(format!("gold passage {id} not in candidates"));
                }
            }
            if let Some(k) = example.hop_count {
                if k != example.gold_set.len() {
                    violations.push(format!(
                        "hop_count {k} does not match gold_set size {}",
                        example.gold_set.len()
                    ));
                }
            }
        }
    }
    if example.hop_count == Some(0) {
        violations.push("hop_count must be positive".to_string());
    }
    violations
}

/// An ordered, duplicate-free passage chain with the score of its full sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainHypothesis {
    pub prefix: Vec<PassageId>,
    pub score: f64,
}

impl ChainHypothesis {
    /// The empty chain that seeds the first hop.
    pub fn seed() -> Self {
        Self {
            prefix: Vec::new(),
            score: 0.0,
        }
    }

    pub fn hop(&self) -> usize {
        self.prefix.len()
    }

    pub fn contains(&self, id: &PassageId) -> bool {
        self.prefix.contains(id)
    }

    /// Appends `passage_id`, the only way a prefix grows.
    pub fn extend_chain(&self, passage_id: PassageId, new_score: f64) -> Result<Self, ChainError> {
        if self.contains(&passage_id) {
            return Err(ChainError::DuplicatePassage(passage_id));
        }
        let mut prefix = Vec::with_capacity(self.prefix.len() + 1);
        prefix.extend_from_slice(&self.prefix);
        prefix.push(passage_id);
        Ok(Self {
            prefix,
            score: new_score,
        })
    }
}

/// Total order used everywhere hypotheses are ranked: score descending,
/// then prefix id list ascending.
pub fn canonical_cmp(a: &ChainHypothesis, b: &ChainHypothesis) -> Ordering {
    b.score
        .total_cmp(&a.score)
        .then_with(|| a.prefix.cmp(&b.prefix))
}

/// The hypotheses retained after one hop.
#[derive(Debug, Clone, PartialEq)]
pub struct Beam {
    pub hop: usize,
    pub hypotheses: Vec<ChainHypothesis>,
}

impl Beam {
    /// Hop-0 beam holding only the empty chain.
    pub fn seed() -> Self {
        Self {
            hop: 0,
            hypotheses: vec![ChainHypothesis::seed()],
        }
    }

    pub fn best(&self) -> Option<&ChainHypothesis> {
        self.hypotheses.first()
    }

    pub fn len(&self) -> usize {
        self.hypotheses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.hypotheses.is_empty()
    }
}

/// All one-passage extensions of a beam, with scores.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpansionSet {
    pub hop: usize,
    pub items: Vec<ChainHypothesis>,
}

impl ExpansionSet {
    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn max_score(&self) -> Option<f64> {
        self.items.iter().map(|h| h.score).max_by(f64::total_cmp)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn example(gold_chain: Option<Vec<&str>>, gold_set: Vec<&str>) -> MultiHopExample {
        MultiHopExample {
            question: Question::new("q1", "who wrote it"),
            candidates: CandidateSet::new(
                ["P1", "P2", "P3", "P5"]
                    .iter()
                    .map(|id| Passage::new(*id, format!("t{id}"), "body"))
                    .collect(),
            )
            .unwrap(),
            gold_chain: gold_chain.map(ids),
            gold_set: ids(gold_set).into_iter().collect(),
            answer: None,
            hop_count: None,
            extra: Default::default(),
        }
    }

    #[test]
    fn extend_appends_and_rescored() {
        let a = ChainHypothesis {
            prefix: ids(["A"]),
            score: 0.5,
        };
        let ab = a.extend_chain("B".into(), 0.8).unwrap();
        assert_eq!(ab.prefix, ids(["A", "B"]));
        assert_eq!(ab.hop(), 2);
        assert_eq!(ab.score, 0.8);
    }

    #[test]
    fn extend_from_empty() {
        let a = ChainHypothesis::seed()
            .extend_chain("A".into(), 0.9)
            .unwrap();
        assert_eq!(a.prefix, ids(["A"]));
        assert_eq!(a.hop(), 1);
        assert_eq!(a.score, 0.9);
    }

    #[test]
    fn extend_rejects_duplicate() {
        let ab = ChainHypothesis {
            prefix: ids(["A", "B"]),
            score: 0.1,
        };
        assert_eq!(
            ab.extend_chain("A".into(), 1.0),
            Err(ChainError::DuplicatePassage("A".into()))
        );
    }

    #[test]
    fn validate_accepts_valid_instance() {
        assert!(validate_example(&example(Some(vec!["P2", "P5"]), vec!["P2", "P5"])).is_empty());
    }

    #[test]
    fn validate_reports_duplicate_gold() {
        let v = validate_example(&example(Some(vec!["P2", "P2"]), vec!["P2"]));
        assert_eq!(v, vec!["gold_chain contains duplicate P2".to_string()]);
    }

    #[test]
    fn validate_reports_missing_gold() {
        let v = validate_example(&example(Some(vec!["P9"]), vec!["P9"]));
        assert_eq!(v, vec!["gold passage P9 not in candidates".to_string()]);
    }

    #[test]
    fn validate_reports_hop_count_mismatch() {
        let mut ex = example(None, vec!["P1", "P2"]);
        ex.hop_count = Some(3);
        assert_eq!(validate_example(&ex).len(), 1);
    }

    #[test]
    fn candidate_set_rejects_duplicates() {
        let err = CandidateSet::new(vec![Passage::new("A", "", "x"), Passage::new("A", "", "y")]);
        assert_eq!(err, Err(ChainError::DuplicateCandidate("A".into())));
        assert_eq!(
            CandidateSet::new(vec![]),
            Err(ChainError::EmptyCandidateSet)
        );
    }

    #[test]
    fn canonical_order_breaks_ties_by_prefix() {
        let mut hs = [
            ChainHypothesis {
                prefix: ids(["B"]),
                score: 0.5,
            },
            ChainHypothesis {
                prefix: ids(["A"]),
                score: 0.5,
            },
            ChainHypothesis {
                prefix: ids(["C"]),
                score: 0.9,
            },
        ];
        hs.sort_by(canonical_cmp);
        let order: Vec<_> = hs.iter().map(|h| h.prefix[0].as_str()).collect();
        assert_eq!(order, ["C", "A", "B"]);
    }

    proptest! {
        #[test]
        fn random_extensions_never_duplicate(picks in proptest::collection::vec(0u8..6, 0..20)) {
            let mut chain = ChainHypothesis::seed();
            for p in picks {
                let id = PassageId(format!("P{p}"));
                match chain.extend_chain(id.clone(), 0.0) {
                    Ok(next) => chain = next,
                    Err(ChainError::DuplicatePassage(d)) => prop_assert_eq!(d, id),
                    Err(e) => prop_assert!(false, "unexpected {e}"),
                }
                let unique: HashSet<_> = chain.prefix.iter().collect();
                prop_assert_eq!(unique.len(), chain.prefix.len());
            }
        }
    }
}
