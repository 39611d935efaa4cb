//! Dataset ingestion, canonical JSONL storage and run manifests.

mod canonical;
mod manifest;
mod sources;

pub use canonical::{
    read_canonical, read_canonical_str, to_canonical_line, write_canonical, CanonicalPassage,
    CanonicalRecord,
};
pub use manifest::{write_run_manifest, ManifestEntry, RunConfig, RunManifest, ENGINE_VERSION};
pub use sources::{
    ingest_distractor, ingest_str, merge_question_with_passage, IngestOutcome, SourceFormat,
};

use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error in {context} at line {line}, byte offset {offset}: {message}")]
    Parse {
        context: String,
        line: usize,
        offset: usize,
        message: String,
    },
    #[error("record {index} ({qid}): {message}")]
    Record {
        index: usize,
        qid: String,
        message: String,
    },
    #[error("record {index} ({qid}) failed validation: {}", violations.join("; "))]
    Validation {
        index: usize,
        qid: String,
        violations: Vec<String>,
    },
    #[error("manifest is incomplete: missing {missing:?}, duplicated {duplicated:?}, unexpected {unexpected:?}")]
    IncompleteManifest {
        missing: Vec<String>,
        duplicated: Vec<String>,
        unexpected: Vec<String>,
    },
    #[error("serialization failed: {0}")]
    Serialize(#[from] serde_json::Error),
}

impl DatasetError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Self::Io {
            path: path.into(),
            source,
        }
    }

    /// Builds a parse error, converting serde's line/column to a byte offset in `text`.
    pub(crate) fn parse_at(
        context: impl Into<String>,
        text: &str,
        base_line: usize,
        base_offset: usize,
        err: &serde_json::Error,
    ) -> Self {
        let line = err.line().max(1);
        // serde points EOF errors at the last consumed character; the
        // useful position is the end of input.
        let offset: usize = if err.is_eof() {
            text.len()
        } else {
            text.split_inclusive('\n')
                .take(line - 1)
                .map(str::len)
                .sum::<usize>()
                + err.column().saturating_sub(1)
        };
        Self::Parse {
            context: context.into(),
            line: base_line + line - 1,
            offset: base_offset + offset.min(text.len()),
            message: err.to_string(),
        }
    }
}
