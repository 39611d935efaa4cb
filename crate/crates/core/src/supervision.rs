//! Training signal generation.
//!
//! For each gold hop the beam is expanded exactly as at inference time and
//! every (beam hypothesis, unused candidate) sequence is emitted with a 0/1
//! label. Per-hop losses are summed binary cross-entropies over the scorer's
//! logits, and the total loss is their sum.

use std::io::{self, Write};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::beam::{select_top, SearchError};
use crate::scoring::{score_batch, Head, ScoreError, ScoreRequest, Scorer};
use crate::types::{
    canonical_cmp, Beam, ChainHypothesis, ExpansionSet, MultiHopExample, PassageId,
};

#[derive(Debug, Error)]
pub enum SupervisionError {
    #[error("ordered labels requested but the example has no gold chain")]
    MissingGoldOrder,
    #[error("example {0} has no gold passages")]
    MissingGold(String),
    #[error("hop {hop} is outside the gold chain of length {len}")]
    HopOutOfRange { hop: usize, len: usize },
    #[error("loss over an empty batch")]
    EmptyBatch,
    #[error("non-finite score {0}")]
    NonFinite(f64),
    #[error(transparent)]
    Search(#[from] SearchError),
    #[error(transparent)]
    Score(#[from] ScoreError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSequence {
    pub qid: String,
    pub hop: usize,
    pub head: Head,
    /// The prefix as fed to the scorer, after any shuffling.
    pub prefix: Vec<PassageId>,
    pub candidate: PassageId,
    pub label: u8,
    pub score: f64,
}

/// JSONL export row for a [`LabeledSequence`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledRecord {
    pub qid: String,
    pub hop: usize,
    pub head: u8,
    pub prefix: Vec<PassageId>,
    pub candidate: PassageId,
    pub label: u8,
    pub score: f64,
}

impl From<&LabeledSequence> for LabeledRecord {
    fn from(s: &LabeledSequence) -> Self {
        Self {
            qid: s.qid.clone(),
            hop: s.hop,
            head: s.head.wire_id(),
            prefix: s.prefix.clone(),
            candidate: s.candidate.clone(),
            label: s.label,
            score: s.score,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SupervisionBatch {
    pub qid: String,
    /// `per_hop[t - 1]` holds the sequences emitted at hop `t`.
    pub per_hop: Vec<Vec<LabeledSequence>>,
    pub per_hop_loss: Vec<f64>,
    pub total_loss: f64,
}

impl SupervisionBatch {
    pub fn sequences(&self) -> impl Iterator<Item = &LabeledSequence> {
        self.per_hop.iter().flatten()
    }

    pub fn negatives_per_hop(&self) -> Vec<usize> {
        self.per_hop
            .iter()
            .map(|seqs| seqs.iter().filter(|s| s.label == 0).count())
            .collect()
    }

    /// Writes one JSON object per labeled sequence.
    pub fn write_jsonl<W: Write>(&self, mut out: W) -> io::Result<()> {
        for s in self.sequences() {
            serde_json::to_writer(&mut out, &LabeledRecord::from(s))?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainingConfig {
    pub beam_size: usize,
    /// Label against the ordered gold chain rather than the gold set.
    pub ordered: bool,
    pub shuffle_seed: Option<u64>,
    /// Keep the gold prefix in every hop's beam, evicting the weakest hypothesis.
    pub gold_forcing: bool,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self {
            beam_size: 1,
            ordered: true,
            shuffle_seed: None,
            gold_forcing: false,
        }
    }
}

/// Gold label of `candidate` at `hop` (1-based). The prefix never matters.
pub fn assign_label(
    candidate: &PassageId,
    hop: usize,
    gold: &MultiHopExample,
    ordered: bool,
) -> Result<u8, SupervisionError> {
    if ordered {
        let chain = gold
            .gold_chain
            .as_ref()
            .ok_or(SupervisionError::MissingGoldOrder)?;
        if hop == 0 || hop > chain.len() {
            return Err(SupervisionError::HopOutOfRange {
                hop,
                len: chain.len(),
            });
        }
        Ok(u8::from(&chain[hop - 1] == candidate))
    } else {
        Ok(u8::from(gold.gold_set.contains(candidate)))
    }
}

/// `ln(1 + e^x)` without overflow.
fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// Summed binary cross-entropy of logistic(score) against each label.
pub fn hop_loss(sequences: &[LabeledSequence]) -> Result<f64, SupervisionError> {
    if sequences.is_empty() {
        return Err(SupervisionError::EmptyBatch);
    }
    let mut total = 0.0;
    for s in sequences {
        if !s.score.is_finite() {
            return Err(SupervisionError::NonFinite(s.score));
        }
        // -ln sigmoid(s) = softplus(-s); -ln(1 - sigmoid(s)) = softplus(s)
        total += if s.label == 1 {
            softplus(-s.score)
        } else {
            softplus(s.score)
        };
    }
    Ok(total)
}

pub fn total_loss(per_hop_losses: &[f64]) -> f64 {
    per_hop_losses.iter().sum()
}

/// Seeded permutation of a prefix.
pub fn shuffle_prefix(prefix: &[PassageId], seed: u64) -> Vec<PassageId> {
    let mut out = prefix.to_vec();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    out.shuffle(&mut rng);
    out
}

// FNV-1a, stable across platforms and releases.
fn stable_hash(s: &str) -> u64 {
    s.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

fn shuffle_seed_for(base: u64, qid: &str, hop: usize, beam_index: usize) -> u64 {
    let mut h = base ^ stable_hash(qid);
    h = h.wrapping_mul(0x9e37_79b9_7f4a_7c15) ^ hop as u64;
    h.wrapping_mul(0x9e37_79b9_7f4a_7c15) ^ beam_index as u64
}

fn is_gold_prefix(hyp: &ChainHypothesis, gold: &MultiHopExample, ordered: bool) -> bool {
    if ordered {
        gold.gold_chain
            .as_ref()
            .is_some_and(|c| c.len() >= hyp.hop() && c[..hyp.hop()] == hyp.prefix[..])
    } else {
        hyp.prefix.iter().all(|id| gold.gold_set.contains(id))
    }
}

fn force_gold(
    beam: &mut Beam,
    previous: &ExpansionSet,
    gold: &MultiHopExample,
    ordered: bool,
    beam_size: usize,
) {
    if beam
        .hypotheses
        .iter()
        .any(|h| is_gold_prefix(h, gold, ordered))
    {
        return;
    }
    let Some(best_gold) = previous
        .items
        .iter()
        .filter(|h| is_gold_prefix(h, gold, ordered))
        .min_by(|a, b| canonical_cmp(a, b))
    else {
        return;
    };
    if beam.hypotheses.len() >= beam_size {
        beam.hypotheses.pop();
    }
    beam.hypotheses.push(best_gold.clone());
    beam.hypotheses.sort_by(canonical_cmp);
}

/// Emits labeled sequences for every gold hop along the scorer's own beams.
pub fn emit_training_batch(
    example: &MultiHopExample,
    scorer: &dyn Scorer,
    config: &TrainingConfig,
) -> Result<SupervisionBatch, SupervisionError> {
    if config.beam_size == 0 {
        return Err(SearchError::InvalidConfig("beam_size must be positive".into()).into());
    }
    let qid = &example.question.id;
    let k = if config.ordered {
        example
            .gold_chain
            .as_ref()
            .ok_or(SupervisionError::MissingGoldOrder)?
            .len()
    } else {
        example.gold_set.len()
    };
    if k == 0 {
        return Err(SupervisionError::MissingGold(qid.clone()));
    }

    let candidates = &example.candidates;
    let mut beam = Beam::seed();
    let mut previous: Option<ExpansionSet> = None;
    let mut per_hop = Vec::with_capacity(k);
    let mut per_hop_loss = Vec::with_capacity(k);

    for hop in 1..=k {
        if config.gold_forcing {
            if let Some(prev) = &previous {
                force_gold(&mut beam, prev, example, config.ordered, config.beam_size);
            }
        }

        let mut requests = Vec::new();
        let mut pending = Vec::new();
        for (beam_index, hyp) in beam.hypotheses.iter().enumerate() {
            let fed_prefix = match config.shuffle_seed {
                Some(seed) if hyp.hop() > 1 => {
                    shuffle_prefix(&hyp.prefix, shuffle_seed_for(seed, qid, hop, beam_index))
                }
                _ => hyp.prefix.clone(),
            };
            let prefix_passages = candidates.resolve(&fed_prefix).map_err(SearchError::from)?;
            for cand in candidates.iter().filter(|c| !hyp.contains(&c.id)) {
                requests.push(ScoreRequest::new(
                    &example.question,
                    prefix_passages.clone(),
                    cand,
                ));
                pending.push((hyp, fed_prefix.clone(), &cand.id));
            }
        }
        if requests.is_empty() {
            return Err(SearchError::NoLegalExpansion.into());
        }
        let scores = score_batch(scorer, &requests)?;

        let mut sequences = Vec::with_capacity(pending.len());
        let mut items = Vec::with_capacity(pending.len());
        for ((hyp, fed_prefix, cand), score) in pending.into_iter().zip(scores) {
            sequences.push(LabeledSequence {
                qid: qid.clone(),
                hop,
                head: Head::for_prefix_len(fed_prefix.len()),
                prefix: fed_prefix,
                candidate: cand.clone(),
                label: assign_label(cand, hop, example, config.ordered)?,
                score,
            });
            items.push(
                hyp.extend_chain(cand.clone(), score)
                    .map_err(SearchError::from)?,
            );
        }
        per_hop_loss.push(hop_loss(&sequences)?);
        per_hop.push(sequences);

        let expansions = ExpansionSet { hop, items };
        beam = select_top(expansions.clone(), config.beam_size);
        previous = Some(expansions);
    }

    Ok(SupervisionBatch {
        qid: qid.clone(),
        total_loss: total_loss(&per_hop_loss),
        per_hop,
        per_hop_loss,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scoring::{ConstantScorer, LookupScorer, LookupTable};
    use crate::types::{ids, CandidateSet, Passage, Question};
    use proptest::prelude::*;

    fn example(n: usize, gold: &[&str]) -> MultiHopExample {
        let passages = (1..=n)
            .map(|i| Passage::new(format!("P{i}"), format!("T{i}"), format!("body {i}")))
            .collect();
        MultiHopExample {
            question: Question::new("q", "question"),
            candidates: CandidateSet::new(passages).unwrap(),
            gold_chain: Some(ids(gold.iter().copied())),
            gold_set: ids(gold.iter().copied()).into_iter().collect(),
            answer: None,
            hop_count: Some(gold.len()),
            extra: Default::default(),
        }
    }

    fn seq(label: u8, score: f64) -> LabeledSequence {
        LabeledSequence {
            qid: "q".into(),
            hop: 1,
            head: Head::FirstHop,
            prefix: vec![],
            candidate: "P1".into(),
            label,
            score,
        }
    }

    #[test]
    fn ordered_and_unordered_labels() {
        let ex = example(7, &["P2", "P5", "P7"]);
        assert_eq!(assign_label(&"P5".into(), 2, &ex, true).unwrap(), 1);
        assert_eq!(assign_label(&"P7".into(), 2, &ex, true).unwrap(), 0);
        assert_eq!(assign_label(&"P7".into(), 2, &ex, false).unwrap(), 1);
        assert_eq!(assign_label(&"P1".into(), 2, &ex, false).unwrap(), 0);
        let mut unordered = ex.clone();
        unordered.gold_chain = None;
        assert!(matches!(
            assign_label(&"P5".into(), 2, &unordered, true),
            Err(SupervisionError::MissingGoldOrder)
        ));
        assert!(matches!(
            assign_label(&"P5".into(), 4, &ex, true),
            Err(SupervisionError::HopOutOfRange { hop: 4, len: 3 })
        ));
    }

    #[test]
    fn hop_loss_hand_values() {
        let loss = hop_loss(&[seq(1, 4f64.ln()), seq(0, (3.0f64 / 7.0).ln())]).unwrap();
        assert!((loss - -(0.8f64.ln() + 0.7f64.ln())).abs() < 1e-12);
        assert!((loss - 0.5798).abs() < 1e-4);
        assert!(hop_loss(&[seq(1, 30.0)]).unwrap() < 1e-12);
        assert!((hop_loss(&[seq(1, 0.0)]).unwrap() - 2f64.ln()).abs() < 1e-15);
        assert!(matches!(hop_loss(&[]), Err(SupervisionError::EmptyBatch)));
        assert!(hop_loss(&[seq(0, f64::NAN)]).is_err());
    }

    #[test]
    fn total_loss_sums() {
        assert!((total_loss(&[0.5798, 0.7125]) - 1.2923).abs() < 1e-12);
        assert_eq!(total_loss(&[0.0]), 0.0);
        assert_eq!(total_loss(&[]), 0.0);
    }

    #[test]
    fn shuffle_is_seeded_permutation() {
        assert_eq!(shuffle_prefix(&ids(["P1"]), 99), ids(["P1"]));
        let p = ids(["P1", "P2", "P3"]);
        let a = shuffle_prefix(&p, 7);
        assert_eq!(a, shuffle_prefix(&p, 7));
        let mut sorted = a.clone();
        sorted.sort();
        assert_eq!(sorted, p);
    }

    #[test]
    fn emission_count_three_candidates_two_hops() {
        let ex = example(3, &["P1", "P2"]);
        let cfg = TrainingConfig {
            beam_size: 2,
            ..TrainingConfig::default()
        };
        let batch = emit_training_batch(&ex, &ConstantScorer(0.0), &cfg).unwrap();
        assert_eq!(batch.per_hop[0].len(), 3);
        assert_eq!(batch.per_hop[1].len(), 4);
        assert!(batch.per_hop[0].iter().all(|s| s.head == Head::FirstHop));
        assert!(batch.per_hop[1].iter().all(|s| s.head == Head::LaterHop));
        let sum: f64 = batch.per_hop_loss.iter().sum();
        assert!((batch.total_loss - sum).abs() < 1e-9);
    }

    #[test]
    fn greedy_on_gold_path_has_one_positive_per_hop() {
        let ex = example(5, &["P3", "P1", "P4"]);
        let mut t = LookupTable::new();
        t.insert("q", &["P3"], 5.0);
        t.insert("q", &["P3", "P1"], 5.0);
        t.insert("q", &["P3", "P1", "P4"], 5.0);
        let cfg = TrainingConfig {
            beam_size: 1,
            ..TrainingConfig::default()
        };
        let batch = emit_training_batch(&ex, &LookupScorer::new(t), &cfg).unwrap();
        for hop in &batch.per_hop {
            assert_eq!(hop.iter().filter(|s| s.label == 1).count(), 1);
        }
    }

    #[test]
    fn gold_forcing_keeps_gold_prefix_under_adversarial_scores() {
        let ex = example(5, &["P1", "P2", "P3"]);
        // Every chain that starts with gold scores lowest.
        let mut t = LookupTable::new();
        t.default_missing = 1.0;
        t.insert("q", &["P1"], -10.0);
        t.insert("q", &["P1", "P2"], -10.0);
        let scorer = LookupScorer::new(t);

        let forced = TrainingConfig {
            beam_size: 2,
            gold_forcing: true,
            ..TrainingConfig::default()
        };
        let batch = emit_training_batch(&ex, &scorer, &forced).unwrap();
        for hop in &batch.per_hop[1..] {
            assert!(hop.iter().any(|s| s.label == 1 && s.head == Head::LaterHop));
        }

        let free = TrainingConfig {
            gold_forcing: false,
            ..forced
        };
        let batch = emit_training_batch(&ex, &scorer, &free).unwrap();
        let hop3_positive_after_gold = batch.per_hop[2]
            .iter()
            .any(|s| s.label == 1 && s.prefix == ids(["P1", "P2"]));
        assert!(!hop3_positive_after_gold);
    }

    #[test]
    fn shuffle_changes_fed_prefix_but_not_labels() {
        let ex = example(6, &["P1", "P2", "P3", "P4"]);
        let plain = TrainingConfig {
            beam_size: 2,
            ..TrainingConfig::default()
        };
        let shuffled = TrainingConfig {
            shuffle_seed: Some(3),
            ..plain
        };
        let a = emit_training_batch(&ex, &ConstantScorer(0.0), &plain).unwrap();
        let b = emit_training_batch(&ex, &ConstantScorer(0.0), &shuffled).unwrap();
        assert_eq!(a.negatives_per_hop(), b.negatives_per_hop());
        for (x, y) in a.sequences().zip(b.sequences()) {
            let mut px = x.prefix.clone();
            let mut py = y.prefix.clone();
            px.sort();
            py.sort();
            assert_eq!(px, py);
            assert_eq!(x.label, y.label);
        }
        assert_eq!(
            b,
            emit_training_batch(&ex, &ConstantScorer(0.0), &shuffled).unwrap()
        );
    }

    #[test]
    fn export_rows_use_wire_head_ids() {
        let ex = example(3, &["P1", "P2"]);
        let batch =
            emit_training_batch(&ex, &ConstantScorer(0.5), &TrainingConfig::default()).unwrap();
        let mut buf = Vec::new();
        batch.write_jsonl(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let first: serde_json::Value = serde_json::from_str(text.lines().next().unwrap()).unwrap();
        assert_eq!(
            first,
            serde_json::json!({"qid":"q","hop":1,"head":1,"prefix":[],"candidate":"P1","label":1,"score":0.5})
        );
        assert_eq!(text.lines().count(), 3 + 2);
    }

    #[test]
    fn missing_gold_is_an_error() {
        let mut ex = example(3, &["P1"]);
        ex.gold_chain = None;
        ex.gold_set.clear();
        let cfg = TrainingConfig {
            ordered: false,
            ..TrainingConfig::default()
        };
        assert!(matches!(
            emit_training_batch(&ex, &ConstantScorer(0.0), &cfg),
            Err(SupervisionError::MissingGold(_))
        ));
    }

    proptest! {
        #[test]
        fn total_loss_is_order_free(losses in proptest::collection::vec(0.0f64..50.0, 0..10)) {
            let mut rev = losses.clone();
            rev.reverse();
            prop_assert!((total_loss(&losses) - total_loss(&rev)).abs() < 1e-9);
        }

        #[test]
        fn shuffle_is_always_a_permutation(n in 0usize..8, seed in any::<u64>()) {
            let p: Vec<PassageId> = (0..n).map(|i| PassageId(format!("P{i}"))).collect();
            let mut s = shuffle_prefix(&p, seed);
            s.sort();
            let mut sorted = p.clone();
            sorted.sort();
            prop_assert_eq!(s, sorted);
        }
    }
}
