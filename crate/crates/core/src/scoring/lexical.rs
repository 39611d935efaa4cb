use std::collections::HashSet;

use super::{tokenize, ScoreError, ScoreProfile, ScoreRequest, Scorer};

/// Fraction of the candidate's distinct tokens already present in the
/// question or the prefix passages.
pub fn lexical_score(request: &ScoreRequest<'_>) -> Result<f64, ScoreError> {
    let candidate: HashSet<String> = tokenize(&request.candidate.title)
        .into_iter()
        .chain(tokenize(&request.candidate.body))
        .collect();
    if candidate.is_empty() {
        return Err(ScoreError::EmptyCandidate(request.candidate.id.to_string()));
    }
    let mut context: HashSet<String> = tokenize(&request.question.text).into_iter().collect();
    for p in &request.prefix {
        context.extend(tokenize(&p.title));
        context.extend(tokenize(&p.body));
    }
    let shared = candidate.iter().filter(|t| context.contains(*t)).count();
    Ok(shared as f64 / candidate.len() as f64)
}

/// Deterministic token-containment scorer; both heads share the formula.
#[derive(Debug, Clone, Copy, Default)]
pub struct LexicalScorer;

impl Scorer for LexicalScorer {
    fn id(&self) -> String {
        "lexical".to_string()
    }

    fn profile(&self) -> ScoreProfile {
        ScoreProfile::Unit
    }

    fn score_batch(&self, requests: &[ScoreRequest<'_>]) -> Result<Vec<f64>, ScoreError> {
        requests.iter().map(lexical_score).collect()
    }
}
