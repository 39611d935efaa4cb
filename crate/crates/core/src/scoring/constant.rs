use super::{ScoreError, ScoreProfile, ScoreRequest, Scorer};

/// Gives every sequence the same score. Useful for exercising tie rules.
#[derive(Debug, Clone, Copy)]
pub struct ConstantScorer(pub f64);

impl Scorer for ConstantScorer {
    fn id(&self) -> String {
        format!("constant:{}", self.0)
    }

    fn profile(&self) -> ScoreProfile {
        ScoreProfile::Logit
    }

    fn score_batch(&self, requests: &[ScoreRequest<'_>]) -> Result<Vec<f64>, ScoreError> {
        Ok(vec![self.0; requests.len()])
    }
}
