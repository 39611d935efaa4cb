//! Retrieval metrics and report aggregation.
//!
//! EM and F1 compare predicted and gold passage *sets*; chain order never
//! matters. `chain_top2_em` scores reranked chain lists, and
//! `additional_hop_probe` measures how far one extra hop falls below the gold
//! hop count.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::beam::{expand, search_fixed_beam, RankedChain, SearchError};
use crate::scoring::Scorer;
use crate::types::{MultiHopExample, PassageId};

#[derive(Debug, Error)]
pub enum MetricError {
    #[error("gold set is empty")]
    EmptyGold,
    #[error("top chain has {0} passages, at least 2 are required")]
    ChainTooShort(usize),
    #[error("expected exactly 2 gold passages, got {0}")]
    GoldNotPair(usize),
    #[error("no chains to evaluate")]
    NoChains,
    #[error("no results to aggregate")]
    EmptyResults,
    #[error(transparent)]
    Search(#[from] SearchError),
}

fn as_set<'a, I>(ids: I) -> BTreeSet<&'a PassageId>
where
    I: IntoIterator<Item = &'a PassageId>,
{
    ids.into_iter().collect()
}

/// 1 iff the predicted and gold passage sets are equal.
pub fn retrieval_em<'a, P, G>(predicted: P, gold: G) -> u8
where
    P: IntoIterator<Item = &'a PassageId>,
    G: IntoIterator<Item = &'a PassageId>,
{
    u8::from(as_set(predicted) == as_set(gold))
}

/// Harmonic mean of set precision and recall.
pub fn retrieval_f1<'a, P, G>(predicted: P, gold: G) -> Result<f64, MetricError>
where
    P: IntoIterator<Item = &'a PassageId>,
    G: IntoIterator<Item = &'a PassageId>,
{
    let pred = as_set(predicted);
    let gold = as_set(gold);
    if gold.is_empty() {
        return Err(MetricError::EmptyGold);
    }
    let hits = pred.intersection(&gold).count() as f64;
    let precision = if pred.is_empty() {
        0.0
    } else {
        hits / pred.len() as f64
    };
    let recall = hits / gold.len() as f64;
    if precision + recall == 0.0 {
        return Ok(0.0);
    }
    Ok(2.0 * precision * recall / (precision + recall))
}

/// 1 iff the first two passages of the top-ranked chain are the two gold passages.
pub fn chain_top2_em(
    ranked: &[RankedChain],
    gold: &BTreeSet<PassageId>,
) -> Result<u8, MetricError> {
    if gold.len() != 2 {
        return Err(MetricError::GoldNotPair(gold.len()));
    }
    let top = ranked.first().ok_or(MetricError::NoChains)?;
    if top.chain.len() < 2 {
        return Err(MetricError::ChainTooShort(top.chain.len()));
    }
    Ok(retrieval_em(&top.chain[..2], gold))
}

/// Best score of one further hop past `gold_k` from the fixed-hop beam.
pub fn additional_hop_probe(
    example: &MultiHopExample,
    scorer: &dyn Scorer,
    beam_size: usize,
    gold_k: usize,
) -> Result<f64, MetricError> {
    let (beam, _) = search_fixed_beam(
        &example.question,
        &example.candidates,
        scorer,
        beam_size,
        gold_k,
    )?;
    let extra = expand(&beam, &example.question, &example.candidates, scorer)?;
    extra
        .max_score()
        .ok_or(MetricError::Search(SearchError::NoLegalExpansion))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricCell {
    pub em: f64,
    pub f1: f64,
    pub n: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbeStats {
    pub mean: f64,
    pub min: f64,
    pub max: f64,
}

/// Aggregated retrieval metrics, overall and per gold hop count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub overall: MetricCell,
    pub by_hops: BTreeMap<String, MetricCell>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub probe: Option<BTreeMap<String, ProbeStats>>,
}

/// Per-question scores for one retrieval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuestionScore {
    pub hops: usize,
    pub em: u8,
    pub f1: f64,
}

pub fn score_question(
    predicted: &[PassageId],
    example: &MultiHopExample,
) -> Result<QuestionScore, MetricError> {
    Ok(QuestionScore {
        hops: example.hops(),
        em: retrieval_em(predicted, &example.gold_set),
        f1: retrieval_f1(predicted, &example.gold_set)?,
    })
}

fn cell(scores: &[QuestionScore]) -> MetricCell {
    let n = scores.len();
    let em = scores.iter().map(|s| f64::from(s.em)).sum::<f64>() / n as f64;
    let f1 = scores.iter().map(|s| s.f1).sum::<f64>() / n as f64;
    MetricCell { em, f1, n }
}

/// Means of per-question EM and F1, overall and grouped by gold hop count.
pub fn aggregate_report<'a, I>(results: I) -> Result<MetricsReport, MetricError>
where
    I: IntoIterator<Item = (&'a [PassageId], &'a MultiHopExample)>,
{
    let scores = results
        .into_iter()
        .map(|(pred, ex)| score_question(pred, ex))
        .collect::<Result<Vec<_>, _>>()?;
    aggregate_scores(&scores)
}

pub fn aggregate_scores(scores: &[QuestionScore]) -> Result<MetricsReport, MetricError> {
    if scores.is_empty() {
        return Err(MetricError::EmptyResults);
    }
    let mut groups: BTreeMap<usize, Vec<QuestionScore>> = BTreeMap::new();
    for s in scores {
        groups.entry(s.hops).or_default().push(*s);
    }
    Ok(MetricsReport {
        overall: cell(scores),
        by_hops: groups
            .into_iter()
            .map(|(hops, group)| (hops.to_string(), cell(&group)))
            .collect(),
        probe: None,
    })
}

/// Mean, min and max probe score per gold hop count.
pub fn probe_stats(values: &[(usize, f64)]) -> BTreeMap<String, ProbeStats> {
    let mut groups: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    for &(hops, v) in values {
        groups.entry(hops).or_default().push(v);
    }
    groups
        .into_iter()
        .map(|(hops, vs)| {
            let mean = vs.iter().sum::<f64>() / vs.len() as f64;
            let min = vs.iter().copied().fold(f64::INFINITY, f64::min);
            let max = vs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            (hops.to_string(), ProbeStats { mean, min, max })
        })
        .collect()
}

fn hop_order(report: &MetricsReport) -> Vec<(&String, &MetricCell)> {
    let mut rows: Vec<_> = report.by_hops.iter().collect();
    rows.sort_by_key(|(k, _)| k.parse::<usize>().unwrap_or(usize::MAX));
    rows
}

impl MetricsReport {
    /// Aligned text table: one row per hop group plus an overall row.
    pub fn render_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{:<10} {:>8} {:>8} {:>6}", "hops", "EM", "F1", "n");
        for (hops, c) in hop_order(self) {
            let _ = writeln!(
                out,
                "{:<10} {:>8.2} {:>8.2} {:>6}",
                hops,
                c.em * 100.0,
                c.f1 * 100.0,
                c.n
            );
        }
        let c = &self.overall;
        let _ = writeln!(
            out,
            "{:<10} {:>8.2} {:>8.2} {:>6}",
            "overall",
            c.em * 100.0,
            c.f1 * 100.0,
            c.n
        );
        if let Some(probe) = &self.probe {
            let _ = writeln!(
                out,
                "\n{:<10} {:>8} {:>8} {:>8}",
                "probe", "mean", "min", "max"
            );
            for (hops, p) in probe {
                let _ = writeln!(
                    out,
                    "{:<10} {:>8.3} {:>8.3} {:>8.3}",
                    hops, p.mean, p.min, p.max
                );
            }
        }
        out
    }
}

/// One row per beam size: beam size, EM, F1 (percentages).
pub fn render_sweep_table(rows: &[(usize, MetricsReport)]) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{:<10} {:>8} {:>8}", "beam size", "EM", "F1");
    for (beam, report) in rows {
        let _ = writeln!(
            out,
            "{:<10} {:>8.2} {:>8.2}",
            beam,
            report.overall.em * 100.0,
            report.overall.f1 * 100.0
        );
    }
    out
}
