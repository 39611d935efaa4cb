//! Adapters from distractor-setting QA dumps to [`MultiHopExample`].
//!
//! | canonical     | hotpot / twowiki                          | musique                                   |
//! |---------------|-------------------------------------------|-------------------------------------------|
//! | `qid`         | `_id` (or `id`)                           | `id`                                      |
//! | `question`    | `question`                                | `question`                                |
//! | candidate id  | position in `context`                     | `paragraphs[].idx`                        |
//! | title / text  | `context[i][0]` / joined `context[i][1]`  | `title` / `paragraph_text`                |
//! | `gold_chain`  | none (no hop order)                       | `question_decomposition[].paragraph_support_idx` |
//! | `gold_set`    | titles of `supporting_facts`              | chain elements, else `is_supporting`      |
//! | `answer`      | `answer`                                  | `answer`                                  |
//!
//! Both JSON arrays and JSON lines are accepted for every format.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde_json::Value;

use super::DatasetError;
use crate::types::{validate_example, CandidateSet, MultiHopExample, Passage, PassageId, Question};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SourceFormat {
    HotpotStyle,
    MusiqueStyle,
    TwowikiStyle,
}

impl FromStr for SourceFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "hotpot" | "hotpot_style" => Ok(Self::HotpotStyle),
            "musique" | "musique_style" => Ok(Self::MusiqueStyle),
            "twowiki" | "twowiki_style" | "2wiki" => Ok(Self::TwowikiStyle),
            _ => Err(format!(
                "unknown source format `{s}` (hotpot, musique, twowiki)"
            )),
        }
    }
}

/// Ingested examples plus the records dropped in non-strict mode.
#[derive(Debug, Clone, PartialEq)]
pub struct IngestOutcome {
    pub examples: Vec<MultiHopExample>,
    /// `(record index, qid, violations)` for each skipped record.
    pub skipped: Vec<(usize, String, Vec<String>)>,
}

/// Appends the source passage to a question, for datasets whose questions
/// only make sense next to the passage they were written from.
pub fn merge_question_with_passage(question: &str, passage: &str) -> String {
    format!("{} {}", question.trim(), passage.trim())
}

pub fn ingest_distractor(
    path: &Path,
    format: SourceFormat,
    strict: bool,
) -> Result<IngestOutcome, DatasetError> {
    let text = fs::read_to_string(path).map_err(|e| DatasetError::io(path, e))?;
    ingest_str(&text, &path.display().to_string(), format, strict)
}

/// Parses, maps and validates every record in `text`.
///
/// Strict mode aborts on the first invalid record; otherwise invalid records
/// are logged and reported in [`IngestOutcome::skipped`].
pub fn ingest_str(
    text: &str,
    context: &str,
    format: SourceFormat,
    strict: bool,
) -> Result<IngestOutcome, DatasetError> {
    let records = split_records(text, context)?;
    let mut examples = Vec::with_capacity(records.len());
    let mut skipped = Vec::new();
    for (index, record) in records.iter().enumerate() {
        let example = match format {
            SourceFormat::HotpotStyle => from_hotpot(record, index, &["type", "level"]),
            SourceFormat::TwowikiStyle => from_hotpot(record, index, &["type"]),
            SourceFormat::MusiqueStyle => from_musique(record, index),
        }?;
        let violations = validate_example(&example);
        if violations.is_empty() {
            examples.push(example);
        } else if strict {
            return Err(DatasetError::Validation {
                index,
                qid: example.question.id,
                violations,
            });
        } else {
            log::warn!(
                "skipping record {index} ({}): {}",
                example.question.id,
                violations.join("; ")
            );
            skipped.push((index, example.question.id, violations));
        }
    }
    Ok(IngestOutcome { examples, skipped })
}

fn split_records(text: &str, context: &str) -> Result<Vec<Value>, DatasetError> {
    let leading_ws = text.len() - text.trim_start().len();
    if text[leading_ws..].starts_with('[') {
        return serde_json::from_str::<Vec<Value>>(text)
            .map_err(|e| DatasetError::parse_at(context, text, 1, 0, &e));
    }
    let mut out = Vec::new();
    let mut offset = 0;
    for (i, line) in text.split_inclusive('\n').enumerate() {
        if !line.trim().is_empty() {
            let v = serde_json::from_str(line)
                .map_err(|e| DatasetError::parse_at(context, line, i + 1, offset, &e))?;
            out.push(v);
        }
        offset += line.len();
    }
    Ok(out)
}

struct Fields<'a> {
    record: &'a Value,
    index: usize,
    qid: String,
}

impl<'a> Fields<'a> {
    fn new(record: &'a Value, index: usize, id_keys: &[&str]) -> Self {
        let qid = id_keys
            .iter()
            .find_map(|k| record.get(*k))
            .map(|v| match v {
                Value::String(s) => s.clone(),
                other => other.to_string(),
            })
            .unwrap_or_else(|| format!("record-{index}"));
        Self { record, index, qid }
    }

    fn err(&self, message: impl Into<String>) -> DatasetError {
        DatasetError::Record {
            index: self.index,
            qid: self.qid.clone(),
            message: message.into(),
        }
    }

    fn str(&self, key: &str) -> Result<String, DatasetError> {
        self.record
            .get(key)
            .and_then(Value::as_str)
            .map(str::to_string)
            .ok_or_else(|| self.err(format!("missing string field `{key}`")))
    }

    fn opt_str(&self, key: &str) -> Option<String> {
        self.record
            .get(key)
            .and_then(Value::as_str)
            .map(str::to_string)
    }

    fn array(&self, key: &str) -> Result<&'a Vec<Value>, DatasetError> {
        self.record
            .get(key)
            .and_then(Value::as_array)
            .ok_or_else(|| self.err(format!("missing array field `{key}`")))
    }

    fn extras(&self, keys: &[&str]) -> BTreeMap<String, Value> {
        keys.iter()
            .filter_map(|k| self.record.get(*k).map(|v| (k.to_string(), v.clone())))
            .collect()
    }
}

fn from_hotpot(
    record: &Value,
    index: usize,
    extra_keys: &[&str],
) -> Result<MultiHopExample, DatasetError> {
    let f = Fields::new(record, index, &["_id", "id"]);
    let mut passages = Vec::new();
    let mut by_title: HashMap<String, PassageId> = HashMap::new();
    for (i, entry) in f.array("context")?.iter().enumerate() {
        let pair = entry
            .as_array()
            .filter(|p| p.len() == 2)
            .ok_or_else(|| f.err(format!("context[{i}] is not a [title, sentences] pair")))?;
        let title = pair[0]
            .as_str()
            .ok_or_else(|| f.err(format!("context[{i}] title is not a string")))?;
        let body = match &pair[1] {
            Value::Array(sents) => sents
                .iter()
                .map(|s| {
                    s.as_str()
                        .ok_or_else(|| f.err(format!("context[{i}] sentence is not a string")))
                })
                .collect::<Result<Vec<_>, _>>()?
                .concat(),
            Value::String(s) => s.clone(),
            _ => return Err(f.err(format!("context[{i}] sentences are not a list"))),
        };
        let id = PassageId(i.to_string());
        by_title
            .entry(title.to_string())
            .or_insert_with(|| id.clone());
        passages.push(Passage {
            id,
            title: title.to_string(),
            body,
        });
    }

    let mut gold_set = BTreeSet::new();
    for (i, fact) in f.array("supporting_facts")?.iter().enumerate() {
        let title = fact
            .as_array()
            .and_then(|a| a.first())
            .and_then(Value::as_str)
            .ok_or_else(|| f.err(format!("supporting_facts[{i}] has no title")))?;
        // An unmatched title is kept verbatim so validation reports it.
        let id = by_title
            .get(title)
            .cloned()
            .unwrap_or_else(|| PassageId(title.to_string()));
        gold_set.insert(id);
    }

    Ok(MultiHopExample {
        question: Question::new(f.qid.clone(), f.str("question")?),
        candidates: CandidateSet::new_unchecked(passages),
        gold_chain: None,
        hop_count: Some(gold_set.len()),
        gold_set,
        answer: f.opt_str("answer"),
        extra: f.extras(extra_keys),
    })
}

fn id_of(v: &Value) -> Option<PassageId> {
    match v {
        Value::Number(n) => Some(PassageId(n.to_string())),
        Value::String(s) => Some(PassageId(s.clone())),
        _ => None,
    }
}

fn from_musique(record: &Value, index: usize) -> Result<MultiHopExample, DatasetError> {
    let f = Fields::new(record, index, &["id", "_id"]);
    let mut passages = Vec::new();
    let mut supporting = BTreeSet::new();
    for (i, p) in f.array("paragraphs")?.iter().enumerate() {
        let id = p
            .get("idx")
            .and_then(id_of)
            .ok_or_else(|| f.err(format!("paragraphs[{i}] has no idx")))?;
        if p.get("is_supporting").and_then(Value::as_bool) == Some(true) {
            supporting.insert(id.clone());
        }
        passages.push(Passage {
            id,
            title: p
                .get("title")
                .and_then(Value::as_str)
                .unwrap_or_default()
                .to_string(),
            body: p
                .get("paragraph_text")
                .and_then(Value::as_str)
                .ok_or_else(|| f.err(format!("paragraphs[{i}] has no paragraph_text")))?
                .to_string(),
        });
    }

    let chain: Vec<PassageId> = match record
        .get("question_decomposition")
        .and_then(Value::as_array)
    {
        Some(steps) => steps
            .iter()
            .enumerate()
            .map(|(i, s)| {
                s.get("paragraph_support_idx")
                    .and_then(id_of)
                    .ok_or_else(|| {
                        f.err(format!(
                            "question_decomposition[{i}] has no paragraph_support_idx"
                        ))
                    })
            })
            .collect::<Result<_, _>>()?,
        None => Vec::new(),
    };

    let (gold_chain, gold_set, hop_count) = if chain.is_empty() {
        let n = supporting.len();
        (None, supporting, Some(n))
    } else {
        let set = chain.iter().cloned().collect();
        let n = chain.len();
        (Some(chain), set, Some(n))
    };

    Ok(MultiHopExample {
        question: Question::new(f.qid.clone(), f.str("question")?),
        candidates: CandidateSet::new_unchecked(passages),
        gold_chain,
        gold_set,
        answer: f.opt_str("answer"),
        hop_count,
        extra: f.extras(&["answerable"]),
    })
}
