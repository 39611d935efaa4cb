use std::fs;
use std::path::PathBuf;

use chainbeam::dataset::{
    ingest_distractor, read_canonical, write_canonical, DatasetError, SourceFormat,
};

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

const SOURCES: [(&str, &str, SourceFormat); 3] = [
    ("hotpot", "hotpot.json", SourceFormat::HotpotStyle),
    ("musique", "musique.jsonl", SourceFormat::MusiqueStyle),
    ("twowiki", "twowiki.json", SourceFormat::TwowikiStyle),
];

#[test]
fn sources_normalize_to_expected_canonical_bytes() {
    let dir = tempfile::tempdir().unwrap();
    for (name, file, format) in SOURCES {
        let out = ingest_distractor(&fixture(file), format, true).unwrap();
        assert!(out.skipped.is_empty(), "{name}");
        let path = dir.path().join(format!("{name}.jsonl"));
        write_canonical(&out.examples, &path).unwrap();
        let expected = fs::read(fixture(&format!("expected/{name}.canonical.jsonl"))).unwrap();
        assert_eq!(
            fs::read(&path).unwrap(),
            expected,
            "{name} canonical bytes drifted"
        );
    }
}

#[test]
fn canonical_round_trip_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    for (name, _, _) in SOURCES {
        let golden = fixture(&format!("expected/{name}.canonical.jsonl"));
        let examples = read_canonical(&golden).unwrap();
        let path = dir.path().join(format!("{name}.jsonl"));
        write_canonical(&examples, &path).unwrap();
        assert_eq!(
            fs::read(&path).unwrap(),
            fs::read(&golden).unwrap(),
            "{name}"
        );
        assert_eq!(read_canonical(&path).unwrap(), examples);
    }
}

#[test]
fn musique_keeps_decomposition_order() {
    let out =
        ingest_distractor(&fixture("musique.jsonl"), SourceFormat::MusiqueStyle, true).unwrap();
    let chain: Vec<&str> = out.examples[1]
        .gold_chain
        .as_ref()
        .unwrap()
        .iter()
        .map(|p| p.0.as_str())
        .collect();
    assert_eq!(chain, ["2", "1", "3"]);
    assert_eq!(out.examples[1].hops(), 3);
}

#[test]
fn hotpot_gold_set_comes_from_supporting_titles() {
    let out = ingest_distractor(&fixture("hotpot.json"), SourceFormat::HotpotStyle, true).unwrap();
    let gold: Vec<&str> = out.examples[0]
        .gold_set
        .iter()
        .map(|p| p.0.as_str())
        .collect();
    assert_eq!(gold, ["1", "3"]);
    assert!(out.examples[0].gold_chain.is_none());
    assert_eq!(out.examples[0].extra["level"], "medium");
}

const CORRUPTIONS: [(&str, SourceFormat, &str); 5] = [
    (
        "corrupt_missing_supporting_title.json",
        SourceFormat::HotpotStyle,
        "not in candidates",
    ),
    (
        "corrupt_duplicate_idx.jsonl",
        SourceFormat::MusiqueStyle,
        "is duplicated",
    ),
    (
        "corrupt_empty_question.json",
        SourceFormat::HotpotStyle,
        "question text is empty",
    ),
    (
        "corrupt_repeated_support.jsonl",
        SourceFormat::MusiqueStyle,
        "gold_chain contains duplicate",
    ),
    (
        "corrupt_empty_candidates.json",
        SourceFormat::HotpotStyle,
        "candidate set is empty",
    ),
];

#[test]
fn strict_mode_rejects_each_corruption() {
    for (file, format, needle) in CORRUPTIONS {
        match ingest_distractor(&fixture(file), format, true) {
            Err(DatasetError::Validation { violations, .. }) => assert!(
                violations.iter().any(|v| v.contains(needle)),
                "{file}: {violations:?}"
            ),
            other => panic!("{file}: expected validation error, got {other:?}"),
        }
    }
}

#[test]
fn lenient_mode_skips_corrupt_records() {
    for (file, format, _) in CORRUPTIONS {
        let out = ingest_distractor(&fixture(file), format, false).unwrap();
        assert!(out.examples.is_empty(), "{file}");
        assert_eq!(out.skipped.len(), 1, "{file}");
    }
}

#[test]
fn missing_file_is_an_io_error() {
    let err =
        ingest_distractor(&fixture("nope.json"), SourceFormat::HotpotStyle, true).unwrap_err();
    assert!(matches!(err, DatasetError::Io { .. }), "{err:?}");
}
