//! Synthetic datasets whose gold chains a lookup scorer ranks first.

use std::path::Path;

use chainbeam::dataset::write_canonical;
use chainbeam::scoring::{LookupEntry, LookupFile, ScoreProfile, DEFAULT_MISSING};
use chainbeam::{CandidateSet, MultiHopExample, Passage, PassageId, Question};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const GOLD_SCORE: f64 = 5.0;

/// `count` questions over 10 candidates with 2-4 hop ordered gold chains.
///
/// Gold prefixes score `GOLD_SCORE`; a sprinkling of other chains get noise
/// below -1 so tie ordering and wide beams are exercised without disturbing
/// threshold stopping at -1. Everything else falls back to the default.
pub fn gold_aware(count: usize, seed: u64) -> (Vec<MultiHopExample>, LookupFile) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut examples = Vec::with_capacity(count);
    let mut entries = Vec::new();
    for q in 0..count {
        let qid = format!("syn{q:04}");
        let n = 10;
        let k = 2 + q % 3;
        let passages: Vec<Passage> = (0..n)
            .map(|i| {
                Passage::new(
                    format!("p{i}"),
                    format!("Title {i}"),
                    format!("Body of passage {i}."),
                )
            })
            .collect();
        let mut order: Vec<PassageId> = passages.iter().map(|p| p.id.clone()).collect();
        order.shuffle(&mut rng);
        let gold: Vec<PassageId> = order[..k].to_vec();
        for t in 1..=k {
            entries.push(LookupEntry {
                qid: qid.clone(),
                chain: gold[..t].to_vec(),
                score: GOLD_SCORE,
            });
        }
        for _ in 0..15 {
            let len = rng.random_range(1..=k + 1);
            let mut chain = order.clone();
            chain.shuffle(&mut rng);
            chain.truncate(len);
            if chain.len() <= k && chain[..] == gold[..chain.len()] {
                continue;
            }
            entries.push(LookupEntry {
                qid: qid.clone(),
                chain,
                score: rng.random_range(-50.0..-2.0),
            });
        }
        examples.push(MultiHopExample {
            question: Question::new(qid.clone(), format!("Synthetic question {q}?")),
            candidates: CandidateSet::new(passages).unwrap(),
            gold_set: gold.iter().cloned().collect(),
            hop_count: Some(k),
            gold_chain: Some(gold),
            answer: None,
            extra: Default::default(),
        });
    }
    let lookup = LookupFile {
        default_missing: DEFAULT_MISSING,
        profile: ScoreProfile::Logit,
        entries,
    };
    (examples, lookup)
}

/// Writes `dataset.jsonl` and `lookup.json` into `dir`.
pub fn write_gold_aware(dir: &Path, count: usize, seed: u64) -> Vec<MultiHopExample> {
    let (examples, lookup) = gold_aware(count, seed);
    write_canonical(&examples, &dir.join("dataset.jsonl")).unwrap();
    std::fs::write(
        dir.join("lookup.json"),
        serde_json::to_string(&lookup).unwrap(),
    )
    .unwrap();
    examples
}
