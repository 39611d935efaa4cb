//! Hop-wise beam search over passage chains.
//!
//! Each hop extends every retained hypothesis by every passage it does not
//! already contain, scores the resulting sequences in one batch, and keeps the
//! `beam_size` best. In threshold mode the search ends once the best next-hop
//! score drops below `tau`, returning the best chain of the previous hop.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scoring::{score_batch, ScoreError, ScoreRequest, Scorer};
use crate::types::{
    canonical_cmp, Beam, CandidateSet, ChainError, ChainHypothesis, ExpansionSet, MultiHopExample,
    PassageId, Question,
};

/// Largest candidate set `exhaustive_retrieve` will enumerate.
pub const EXHAUSTIVE_MAX_CANDIDATES: usize = 10;
/// Longest chain `exhaustive_retrieve` will enumerate.
pub const EXHAUSTIVE_MAX_HOPS: usize = 5;

#[derive(Debug, Error)]
pub enum SearchError {
    #[error("no legal expansion: every candidate is already used by every hypothesis")]
    NoLegalExpansion,
    #[error("candidate set is empty")]
    EmptyCandidateSet,
    #[error("invalid search config: {0}")]
    InvalidConfig(String),
    #[error("exhaustive search over n={n}, k={k} exceeds the n<={max_n}, k<={max_k} guard")]
    TooLarge {
        n: usize,
        k: usize,
        max_n: usize,
        max_k: usize,
    },
    #[error("no chains to rerank")]
    EmptyChainList,
    #[error("chain {0} is empty")]
    EmptyChain(usize),
    #[error(transparent)]
    Chain(#[from] ChainError),
    #[error(transparent)]
    Score(#[from] ScoreError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SearchMode {
    /// Run exactly `k` hops.
    FixedHops { k: usize },
    /// Stop once the best next-hop score is below `tau`.
    Threshold { tau: f64 },
}

impl fmt::Display for SearchMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SearchMode::FixedHops { k } => write!(f, "fixed:{k}"),
            SearchMode::Threshold { tau } => write!(f, "threshold:{tau}"),
        }
    }
}

impl FromStr for SearchMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (kind, value) = s
            .split_once(':')
            .ok_or_else(|| format!("expected fixed:<k> or threshold:<tau>, got `{s}`"))?;
        match kind {
            "fixed" => value
                .parse()
                .map(|k| SearchMode::FixedHops { k })
                .map_err(|_| format!("bad hop count `{value}`")),
            "threshold" => value
                .parse::<f64>()
                .ok()
                .filter(|t| t.is_finite())
                .map(|tau| SearchMode::Threshold { tau })
                .ok_or_else(|| format!("bad threshold `{value}`")),
            _ => Err(format!("unknown mode `{kind}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchConfig {
    pub beam_size: usize,
    pub mode: SearchMode,
    pub min_hops: usize,
    pub max_hops: usize,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            beam_size: 1,
            mode: SearchMode::Threshold { tau: -1.0 },
            min_hops: 1,
            max_hops: 8,
        }
    }
}

impl SearchConfig {
    pub fn fixed(beam_size: usize, k: usize) -> Self {
        Self {
            beam_size,
            mode: SearchMode::FixedHops { k },
            min_hops: 1,
            max_hops: k.max(8),
        }
    }

    pub fn threshold(beam_size: usize, tau: f64) -> Self {
        Self {
            beam_size,
            mode: SearchMode::Threshold { tau },
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), SearchError> {
        let bad = |m: String| Err(SearchError::InvalidConfig(m));
        if self.beam_size == 0 {
            return bad("beam_size must be positive".into());
        }
        if self.min_hops == 0 {
            return bad("min_hops must be positive".into());
        }
        if self.min_hops > self.max_hops {
            return bad(format!(
                "min_hops {} exceeds max_hops {}",
                self.min_hops, self.max_hops
            ));
        }
        match self.mode {
            SearchMode::FixedHops { k } if k < self.min_hops || k > self.max_hops => bad(format!(
                "fixed hop count {k} outside [{}, {}]",
                self.min_hops, self.max_hops
            )),
            SearchMode::Threshold { tau } if !tau.is_finite() => {
                bad("threshold must be finite".into())
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    FixedKReached,
    BelowThreshold,
    MaxHopsReached,
    CandidatesExhausted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievalResult {
    pub chain: ChainHypothesis,
    pub hops_taken: usize,
    /// Best expansion score per hop; below-threshold stops also record the
    /// rejected hop's best score.
    pub per_hop_best_score: Vec<f64>,
    pub stop_reason: StopReason,
    /// Set when a hop at or under `min_hops` was kept despite scoring below the threshold.
    pub forced_min_hop: bool,
}

/// Scores every one-passage extension of every hypothesis in `beam`.
pub fn expand(
    beam: &Beam,
    question: &Question,
    candidates: &CandidateSet,
    scorer: &dyn Scorer,
) -> Result<ExpansionSet, SearchError> {
    let mut pending: Vec<(&ChainHypothesis, &PassageId)> = Vec::new();
    let mut requests = Vec::new();
    for hyp in &beam.hypotheses {
        let prefix = candidates.resolve(&hyp.prefix)?;
        for cand in candidates.iter().filter(|c| !hyp.contains(&c.id)) {
            requests.push(ScoreRequest::new(question, prefix.clone(), cand));
            pending.push((hyp, &cand.id));
        }
    }
    if requests.is_empty() {
        return Err(SearchError::NoLegalExpansion);
    }
    let scores = score_batch(scorer, &requests)?;
    let items = pending
        .into_iter()
        .zip(scores)
        .map(|((hyp, id), s)| hyp.extend_chain(id.clone(), s))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(ExpansionSet {
        hop: beam.hop + 1,
        items,
    })
}

/// Keeps the `beam_size` best expansions in canonical order.
pub fn select_top(expansions: ExpansionSet, beam_size: usize) -> Beam {
    let mut items = expansions.items;
    items.sort_by(canonical_cmp);
    items.truncate(beam_size);
    Beam {
        hop: expansions.hop,
        hypotheses: items,
    }
}

/// Runs exactly `k` hops and returns the final beam with per-hop best scores.
pub fn search_fixed_beam(
    question: &Question,
    candidates: &CandidateSet,
    scorer: &dyn Scorer,
    beam_size: usize,
    k: usize,
) -> Result<(Beam, Vec<f64>), SearchError> {
    if candidates.is_empty() {
        return Err(SearchError::EmptyCandidateSet);
    }
    let mut beam = Beam::seed();
    let mut best = Vec::with_capacity(k);
    for _ in 0..k {
        let expansions = expand(&beam, question, candidates, scorer)?;
        best.push(expansions.max_score().unwrap_or(f64::NEG_INFINITY));
        beam = select_top(expansions, beam_size);
    }
    Ok((beam, best))
}

/// End-to-end chain retrieval for one example.
pub fn retrieve(
    example: &MultiHopExample,
    scorer: &dyn Scorer,
    config: &SearchConfig,
) -> Result<RetrievalResult, SearchError> {
    config.validate()?;
    let question = &example.question;
    let candidates = &example.candidates;
    if candidates.is_empty() {
        return Err(SearchError::EmptyCandidateSet);
    }

    let tau = match config.mode {
        SearchMode::FixedHops { k } => {
            let (beam, per_hop_best_score) =
                search_fixed_beam(question, candidates, scorer, config.beam_size, k)?;
            let chain = beam
                .hypotheses
                .into_iter()
                .next()
                .ok_or(SearchError::NoLegalExpansion)?;
            return Ok(RetrievalResult {
                hops_taken: chain.hop(),
                chain,
                per_hop_best_score,
                stop_reason: StopReason::FixedKReached,
                forced_min_hop: false,
            });
        }
        SearchMode::Threshold { tau } => tau,
    };

    let mut beam = Beam::seed();
    let mut per_hop_best_score = Vec::new();
    let mut forced_min_hop = false;
    let stop_reason = loop {
        if beam.hop >= config.max_hops {
            break StopReason::MaxHopsReached;
        }
        let expansions = match expand(&beam, question, candidates, scorer) {
            Ok(e) => e,
            Err(SearchError::NoLegalExpansion) if beam.hop > 0 => {
                break StopReason::CandidatesExhausted
            }
            Err(e) => return Err(e),
        };
        let best = expansions.max_score().unwrap_or(f64::NEG_INFINITY);
        per_hop_best_score.push(best);
        if best < tau {
            if expansions.hop > config.min_hops {
                break StopReason::BelowThreshold;
            }
            forced_min_hop = true;
        }
        beam = select_top(expansions, config.beam_size);
    };

    let chain = beam
        .hypotheses
        .into_iter()
        .next()
        .ok_or(SearchError::NoLegalExpansion)?;
    Ok(RetrievalResult {
        hops_taken: chain.hop(),
        chain,
        per_hop_best_score,
        stop_reason,
        forced_min_hop,
    })
}

/// Brute-force oracle: scores every duplicate-free chain of length `k` and
/// returns the best under the canonical order.
pub fn exhaustive_retrieve(
    example: &MultiHopExample,
    scorer: &dyn Scorer,
    k: usize,
) -> Result<ChainHypothesis, SearchError> {
    let candidates = &example.candidates;
    let n = candidates.len();
    if n == 0 {
        return Err(SearchError::EmptyCandidateSet);
    }
    if n > EXHAUSTIVE_MAX_CANDIDATES || k > EXHAUSTIVE_MAX_HOPS {
        return Err(SearchError::TooLarge {
            n,
            k,
            max_n: EXHAUSTIVE_MAX_CANDIDATES,
            max_k: EXHAUSTIVE_MAX_HOPS,
        });
    }
    if k == 0 || k > n {
        return Err(SearchError::NoLegalExpansion);
    }

    let passages = candidates.passages();
    let mut chains: Vec<Vec<usize>> = Vec::new();
    let mut current = Vec::with_capacity(k);
    let mut used = vec![false; n];
    permutations(n, k, &mut current, &mut used, &mut chains);

    let requests: Vec<ScoreRequest<'_>> = chains
        .iter()
        .map(|c| {
            let prefix = c[..k - 1].iter().map(|&i| &passages[i]).collect();
            ScoreRequest::new(&example.question, prefix, &passages[c[k - 1]])
        })
        .collect();
    let scores = score_batch(scorer, &requests)?;
    chains
        .into_iter()
        .zip(scores)
        .map(|(c, score)| ChainHypothesis {
            prefix: c.into_iter().map(|i| passages[i].id.clone()).collect(),
            score,
        })
        .min_by(canonical_cmp)
        .ok_or(SearchError::NoLegalExpansion)
}

fn permutations(
    n: usize,
    k: usize,
    current: &mut Vec<usize>,
    used: &mut [bool],
    out: &mut Vec<Vec<usize>>,
) {
    if current.len() == k {
        out.push(current.clone());
        return;
    }
    for i in 0..n {
        if !used[i] {
            used[i] = true;
            current.push(i);
            permutations(n, k, current, used, out);
            current.pop();
            used[i] = false;
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedChain {
    pub chain: Vec<PassageId>,
    pub score: f64,
    /// Position of the chain in the caller's input list.
    pub input_index: usize,
}

/// Scores externally retrieved chains as full sequences and sorts them by
/// score, descending. Equal scores keep their input order.
pub fn rerank_chains(
    question: &Question,
    candidates: &CandidateSet,
    chains: &[Vec<PassageId>],
    scorer: &dyn Scorer,
) -> Result<Vec<RankedChain>, SearchError> {
    if chains.is_empty() {
        return Err(SearchError::EmptyChainList);
    }
    let mut requests = Vec::with_capacity(chains.len());
    for (i, chain) in chains.iter().enumerate() {
        let (last, prefix_ids) = chain.split_last().ok_or(SearchError::EmptyChain(i))?;
        let mut seen = ChainHypothesis::seed();
        for id in chain {
            seen = seen.extend_chain(id.clone(), 0.0)?;
        }
        let prefix = candidates.resolve(prefix_ids)?;
        let candidate = candidates
            .get(last)
            .ok_or_else(|| ChainError::UnknownPassage(last.clone()))?;
        requests.push(ScoreRequest::new(question, prefix, candidate));
    }
    let scores = score_batch(scorer, &requests)?;
    let mut ranked: Vec<RankedChain> = chains
        .iter()
        .zip(scores)
        .enumerate()
        .map(|(input_index, (chain, score))| RankedChain {
            chain: chain.clone(),
            score,
            input_index,
        })
        .collect();
    ranked.sort_by(|a, b| b.score.total_cmp(&a.score));
    Ok(ranked)
}
