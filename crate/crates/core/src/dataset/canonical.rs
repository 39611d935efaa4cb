use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::DatasetError;
use crate::types::{CandidateSet, MultiHopExample, Passage, PassageId, Question};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CanonicalPassage {
    pub id: PassageId,
    pub title: String,
    pub text: String,
}

/// One example as stored on disk. Unknown top-level fields are kept in `extra`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CanonicalRecord {
    pub qid: String,
    pub question: String,
    pub candidates: Vec<CanonicalPassage>,
    pub gold_chain: Option<Vec<PassageId>>,
    pub gold_set: Vec<PassageId>,
    pub answer: Option<String>,
    pub hops: Option<usize>,
    #[serde(flatten)]
    pub extra: BTreeMap<String, Value>,
}

impl From<&MultiHopExample> for CanonicalRecord {
    fn from(ex: &MultiHopExample) -> Self {
        Self {
            qid: ex.question.id.clone(),
            question: ex.question.text.clone(),
            candidates: ex
                .candidates
                .iter()
                .map(|p| CanonicalPassage {
                    id: p.id.clone(),
                    title: p.title.clone(),
                    text: p.body.clone(),
                })
                .collect(),
            gold_chain: ex.gold_chain.clone(),
            gold_set: ex.gold_set.iter().cloned().collect(),
            answer: ex.answer.clone(),
            hops: ex.hop_count,
            extra: ex.extra.clone(),
        }
    }
}

impl From<CanonicalRecord> for MultiHopExample {
    fn from(r: CanonicalRecord) -> Self {
        Self {
            question: Question::new(r.qid, r.question),
            candidates: CandidateSet::new_unchecked(
                r.candidates
                    .into_iter()
                    .map(|p| Passage {
                        id: p.id,
                        title: p.title,
                        body: p.text,
                    })
                    .collect(),
            ),
            gold_chain: r.gold_chain,
            gold_set: r.gold_set.into_iter().collect(),
            answer: r.answer,
            hop_count: r.hops,
            extra: r.extra,
        }
    }
}

/// Serializes one example as a single JSON line with sorted keys.
pub fn to_canonical_line(example: &MultiHopExample) -> Result<String, DatasetError> {
    // Value maps are BTreeMaps, so going through Value sorts every object's keys.
    let value = serde_json::to_value(CanonicalRecord::from(example))?;
    Ok(serde_json::to_string(&value)?)
}

pub fn write_canonical(examples: &[MultiHopExample], path: &Path) -> Result<(), DatasetError> {
    let mut out = String::new();
    for ex in examples {
        out.push_str(&to_canonical_line(ex)?);
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| DatasetError::io(path, e))
}

pub fn read_canonical(path: &Path) -> Result<Vec<MultiHopExample>, DatasetError> {
    let text = fs::read_to_string(path).map_err(|e| DatasetError::io(path, e))?;
    read_canonical_str(&text, &path.display().to_string())
}

pub fn read_canonical_str(text: &str, context: &str) -> Result<Vec<MultiHopExample>, DatasetError> {
    let mut out = Vec::new();
    let mut offset = 0;
    for (i, line) in text.split_inclusive('\n').enumerate() {
        let trimmed = line.trim();
        if !trimmed.is_empty() {
            let record: CanonicalRecord = serde_json::from_str(trimmed)
                .map_err(|e| DatasetError::parse_at(context, line, i + 1, offset, &e))?;
            out.push(record.into());
        }
        offset += line.len();
    }
    Ok(out)
}
