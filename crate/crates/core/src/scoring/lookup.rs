use std::collections::HashMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ScoreError, ScoreProfile, ScoreRequest, Scorer};
use crate::types::PassageId;

/// Score for any sequence the table does not list.
pub const DEFAULT_MISSING: f64 = -1.0e9;

/// Question id plus the scored chain in scoring order (prefix, then candidate).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct LookupKey {
    pub qid: String,
    pub chain: Vec<PassageId>,
}

impl LookupKey {
    pub fn new(qid: impl Into<String>, chain: Vec<PassageId>) -> Self {
        Self {
            qid: qid.into(),
            chain,
        }
    }

    fn from_request(request: &ScoreRequest<'_>) -> Self {
        let mut chain: Vec<PassageId> = request.prefix.iter().map(|p| p.id.clone()).collect();
        chain.push(request.candidate.id.clone());
        Self {
            qid: request.question.id.clone(),
            chain,
        }
    }
}

/// Exact-key score table, the oracle scorer for tests and synthetic runs.
#[derive(Debug, Clone)]
pub struct LookupTable {
    entries: HashMap<LookupKey, f64>,
    pub default_missing: f64,
}

impl Default for LookupTable {
    fn default() -> Self {
        Self {
            entries: HashMap::new(),
            default_missing: DEFAULT_MISSING,
        }
    }
}

impl LookupTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, qid: &str, chain: &[&str], score: f64) {
        self.entries.insert(
            LookupKey::new(qid, chain.iter().map(|s| PassageId::from(*s)).collect()),
            score,
        );
    }

    pub fn insert_key(&mut self, key: LookupKey, score: f64) {
        self.entries.insert(key, score);
    }

    pub fn get(&self, key: &LookupKey) -> Option<f64> {
        self.entries.get(key).copied()
    }

    pub fn lookup_score(&self, request: &ScoreRequest<'_>) -> f64 {
        self.get(&LookupKey::from_request(request))
            .unwrap_or(self.default_missing)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// One row of a lookup file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LookupEntry {
    pub qid: String,
    pub chain: Vec<PassageId>,
    pub score: f64,
}

/// On-disk form of a lookup table, as read by the `lookup:<path>` scorer spec.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LookupFile {
    #[serde(default = "default_missing")]
    pub default_missing: f64,
    #[serde(default = "default_profile")]
    pub profile: ScoreProfile,
    pub entries: Vec<LookupEntry>,
}

fn default_missing() -> f64 {
    DEFAULT_MISSING
}

fn default_profile() -> ScoreProfile {
    ScoreProfile::Logit
}

impl LookupFile {
    pub fn into_scorer(self, id: String) -> LookupScorer {
        let mut table = LookupTable {
            entries: HashMap::with_capacity(self.entries.len()),
            default_missing: self.default_missing,
        };
        for e in self.entries {
            table.insert_key(LookupKey::new(e.qid, e.chain), e.score);
        }
        LookupScorer {
            table,
            profile: self.profile,
            id,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LookupScorer {
    pub table: LookupTable,
    pub profile: ScoreProfile,
    id: String,
}

impl LookupScorer {
    pub fn new(table: LookupTable) -> Self {
        Self {
            table,
            profile: ScoreProfile::Logit,
            id: "lookup".to_string(),
        }
    }

    pub fn from_path(path: &Path) -> Result<Self, ScoreError> {
        let spec = format!("lookup:{}", path.display());
        let raw = fs::read_to_string(path).map_err(|e| ScoreError::InvalidSpec {
            spec: spec.clone(),
            reason: e.to_string(),
        })?;
        let file: LookupFile = serde_json::from_str(&raw).map_err(|e| ScoreError::InvalidSpec {
            spec: spec.clone(),
            reason: e.to_string(),
        })?;
        Ok(file.into_scorer(spec))
    }
}

impl Scorer for LookupScorer {
    fn id(&self) -> String {
        self.id.clone()
    }

    fn profile(&self) -> ScoreProfile {
        self.profile
    }

    fn score_batch(&self, requests: &[ScoreRequest<'_>]) -> Result<Vec<f64>, ScoreError> {
        Ok(requests
            .iter()
            .map(|r| self.table.lookup_score(r))
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::{Passage, Question};

    #[test]
    fn hit_miss_and_order_sensitivity() {
        let mut table = LookupTable::new();
        table.insert("q1", &["A", "B"], 0.95);
        table.insert("q1", &["B", "A"], 0.1);
        let q = Question::new("q1", "text");
        let a = Passage::new("A", "", "a");
        let b = Passage::new("B", "", "b");
        let c = Passage::new("C", "", "c");

        assert_eq!(
            table.lookup_score(&ScoreRequest::new(&q, vec![&a], &b)),
            0.95
        );
        assert_eq!(
            table.lookup_score(&ScoreRequest::new(&q, vec![&b], &a)),
            0.1
        );
        assert_eq!(
            table.lookup_score(&ScoreRequest::new(&q, vec![&a], &c)),
            -1.0e9
        );
    }

    #[test]
    fn question_id_is_part_of_the_key() {
        let mut table = LookupTable::new();
        table.insert("q1", &["A"], 3.0);
        let q2 = Question::new("q2", "text");
        let a = Passage::new("A", "", "a");
        assert_eq!(
            table.lookup_score(&ScoreRequest::new(&q2, vec![], &a)),
            DEFAULT_MISSING
        );
    }

    #[test]
    fn file_defaults() {
        let file: LookupFile =
            serde_json::from_str(r#"{"entries":[{"qid":"q","chain":["A"],"score":1.5}]}"#).unwrap();
        assert_eq!(file.default_missing, DEFAULT_MISSING);
        assert_eq!(file.profile, ScoreProfile::Logit);
        let scorer = file.into_scorer("lookup:x".into());
        assert_eq!(
            scorer.table.get(&LookupKey::new("q", vec!["A".into()])),
            Some(1.5)
        );
    }
}
