use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::DatasetError;
use crate::beam::{RetrievalResult, SearchConfig};
use crate::eval::MetricsReport;

pub const ENGINE_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Everything needed to repeat a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub dataset: String,
    pub scorer: String,
    pub search: SearchConfig,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub qid: String,
    pub result: RetrievalResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub engine_version: String,
    pub config: RunConfig,
    pub results: Vec<ManifestEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metrics: Option<MetricsReport>,
    /// Only recorded on request, since it makes otherwise identical runs differ.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_clock_ms: Option<u64>,
}

impl RunManifest {
    pub fn new(config: RunConfig, results: Vec<ManifestEntry>) -> Self {
        Self {
            engine_version: ENGINE_VERSION.to_string(),
            config,
            results,
            metrics: None,
            wall_clock_ms: None,
        }
    }

    pub fn results_by_qid(&self) -> BTreeMap<&str, &RetrievalResult> {
        self.results
            .iter()
            .map(|e| (e.qid.as_str(), &e.result))
            .collect()
    }

    /// Checks that every expected question appears exactly once and nothing else does.
    pub fn check_complete<'a, I>(&self, expected_qids: I) -> Result<(), DatasetError>
    where
        I: IntoIterator<Item = &'a str>,
    {
        let expected: BTreeSet<&str> = expected_qids.into_iter().collect();
        let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
        for e in &self.results {
            *counts.entry(e.qid.as_str()).or_default() += 1;
        }
        let missing: Vec<String> = expected
            .iter()
            .filter(|q| !counts.contains_key(*q))
            .map(|q| q.to_string())
            .collect();
        let duplicated: Vec<String> = counts
            .iter()
            .filter(|(_, &c)| c > 1)
            .map(|(q, _)| q.to_string())
            .collect();
        let unexpected: Vec<String> = counts
            .keys()
            .filter(|q| !expected.contains(*q))
            .map(|q| q.to_string())
            .collect();
        if missing.is_empty() && duplicated.is_empty() && unexpected.is_empty() {
            Ok(())
        } else {
            Err(DatasetError::IncompleteManifest {
                missing,
                duplicated,
                unexpected,
            })
        }
    }

    pub fn to_json(&self) -> Result<String, DatasetError> {
        let value = serde_json::to_value(self)?;
        let mut s = serde_json::to_string_pretty(&value)?;
        s.push('\n');
        Ok(s)
    }
}

/// Writes the manifest after checking it covers exactly `expected_qids`.
pub fn write_run_manifest<'a, I>(
    manifest: &RunManifest,
    expected_qids: I,
    path: &Path,
) -> Result<(), DatasetError>
where
    I: IntoIterator<Item = &'a str>,
{
    manifest.check_complete(expected_qids)?;
    fs::write(path, manifest.to_json()?).map_err(|e| DatasetError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::beam::StopReason;
    use crate::types::{ids, ChainHypothesis};

    fn entry(qid: &str) -> ManifestEntry {
        ManifestEntry {
            qid: qid.into(),
            result: RetrievalResult {
                chain: ChainHypothesis {
                    prefix: ids(["1", "0"]),
                    score: 0.75,
                },
                hops_taken: 2,
                per_hop_best_score: vec![1.0, 0.75],
                stop_reason: StopReason::FixedKReached,
                forced_min_hop: false,
            },
        }
    }

    fn manifest(qids: &[&str]) -> RunManifest {
        RunManifest::new(
            RunConfig {
                dataset: "dev.jsonl".into(),
                scorer: "lexical".into(),
                search: SearchConfig::fixed(2, 2),
                seed: 0,
            },
            qids.iter().map(|q| entry(q)).collect(),
        )
    }

    #[test]
    fn writes_one_record_per_question_deterministically() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("manifest.json");
        let m = manifest(&["a", "b", "c"]);
        write_run_manifest(&m, ["a", "b", "c"], &path).unwrap();
        let first = fs::read(&path).unwrap();
        let parsed: RunManifest = serde_json::from_slice(&first).unwrap();
        assert_eq!(parsed.results.len(), 3);
        assert_eq!(parsed, m);
        write_run_manifest(&m, ["a", "b", "c"], &path).unwrap();
        assert_eq!(fs::read(&path).unwrap(), first);
    }

    #[test]
    fn refuses_incomplete_manifest() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("manifest.json");
        let err =
            write_run_manifest(&manifest(&["a", "b", "b"]), ["a", "b", "c"], &path).unwrap_err();
        match err {
            DatasetError::IncompleteManifest {
                missing,
                duplicated,
                ..
            } => {
                assert_eq!(missing, ["c"]);
                assert_eq!(duplicated, ["b"]);
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(!path.exists());
    }
}
