//! HTTP client for an external chain scorer.
//!
//! `POST {base}/score` with
//! `{"items":[{"head":1|2,"question":"...","chain":[{"title":"...","text":"..."}],"candidate":{...}}]}`
//! answers `{"scores":[...]}` with one score per item. `GET {base}/health`
//! answers `{"status":"ok"}`.

use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{ScoreError, ScoreProfile, ScoreRequest, Scorer};
use crate::types::Passage;

/// Environment variable consulted when a `remote` spec carries no URL.
pub const SCORER_URL_ENV: &str = "CHAINBEAM_SCORER_URL";

#[derive(Debug, Clone, PartialEq)]
pub struct RemoteConfig {
    pub url: String,
    pub timeout: Duration,
    /// Extra attempts after the first failure.
    pub retries: u32,
    pub backoff: Duration,
}

impl RemoteConfig {
    pub fn new(url: impl Into<String>) -> Self {
        Self {
            url: url.into().trim_end_matches('/').to_string(),
            timeout: Duration::from_secs(30),
            retries: 2,
            backoff: Duration::from_millis(200),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WirePassage {
    pub title: String,
    pub text: String,
}

impl From<&Passage> for WirePassage {
    fn from(p: &Passage) -> Self {
        Self {
            title: p.title.clone(),
            text: p.body.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WireItem {
    pub head: u8,
    pub question: String,
    pub chain: Vec<WirePassage>,
    pub candidate: WirePassage,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRequestBody {
    pub items: Vec<WireItem>,
}

impl ScoreRequestBody {
    pub fn from_requests(requests: &[ScoreRequest<'_>]) -> Self {
        Self {
            items: requests
                .iter()
                .map(|r| WireItem {
                    head: r.head.wire_id(),
                    question: r.question.text.clone(),
                    chain: r.prefix.iter().map(|p| WirePassage::from(*p)).collect(),
                    candidate: WirePassage::from(r.candidate),
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreResponseBody {
    pub scores: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HealthBody {
    pub status: String,
}

pub struct RemoteScorer {
    config: RemoteConfig,
    agent: ureq::Agent,
}

impl std::fmt::Debug for RemoteScorer {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RemoteScorer")
            .field("config", &self.config)
            .finish()
    }
}

impl RemoteScorer {
    pub fn new(config: RemoteConfig) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(config.timeout))
            .http_status_as_error(false)
            .build()
            .into();
        Self { config, agent }
    }

    pub fn config(&self) -> &RemoteConfig {
        &self.config
    }

    /// Returns `Ok(())` when the service reports `{"status":"ok"}`.
    pub fn health(&self) -> Result<(), ScoreError> {
        let url = format!("{}/health", self.config.url);
        let mut resp = self
            .agent
            .get(&url)
            .call()
            .map_err(|e| ScoreError::ScorerUnavailable(format!("{url}: {e}")))?;
        if resp.status() != 200 {
            return Err(ScoreError::ScorerUnavailable(format!(
                "{url}: HTTP {}",
                resp.status()
            )));
        }
        let body: HealthBody = resp
            .body_mut()
            .read_json()
            .map_err(|e| ScoreError::ScorerUnavailable(format!("{url}: {e}")))?;
        if body.status == "ok" {
            Ok(())
        } else {
            Err(ScoreError::ScorerUnavailable(format!(
                "{url}: status {}",
                body.status
            )))
        }
    }

    fn post_once(&self, body: &ScoreRequestBody) -> Result<Vec<f64>, String> {
        let url = format!("{}/score", self.config.url);
        let mut resp = self
            .agent
            .post(&url)
            .send_json(body)
            .map_err(|e| format!("{url}: {e}"))?;
        let status = resp.status();
        if status != 200 {
            let detail = resp.body_mut().read_to_string().unwrap_or_default();
            return Err(format!("{url}: HTTP {status} {detail}"));
        }
        let parsed: ScoreResponseBody = resp
            .body_mut()
            .read_json()
            .map_err(|e| format!("{url}: bad response body: {e}"))?;
        Ok(parsed.scores)
    }
}

impl Scorer for RemoteScorer {
    fn id(&self) -> String {
        format!("remote:{}", self.config.url)
    }

    fn profile(&self) -> ScoreProfile {
        ScoreProfile::Logit
    }

    fn score_batch(&self, requests: &[ScoreRequest<'_>]) -> Result<Vec<f64>, ScoreError> {
        if requests.is_empty() {
            return Ok(Vec::new());
        }
        let body = ScoreRequestBody::from_requests(requests);
        let mut last_err = String::new();
        for attempt in 0..=self.config.retries {
            if attempt > 0 {
                thread::sleep(self.config.backoff * attempt);
            }
            match self.post_once(&body) {
                Ok(scores) if scores.len() == requests.len() => return Ok(scores),
                Ok(scores) => {
                    return Err(ScoreError::LengthMismatch {
                        expected: requests.len(),
                        got: scores.len(),
                    })
                }
                Err(e) => {
                    log::warn!("score request attempt {} failed: {e}", attempt + 1);
                    last_err = e;
                }
            }
        }
        Err(ScoreError::ScorerUnavailable(format!(
            "{} attempts failed, last error: {last_err}",
            self.config.retries + 1
        )))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::Question;

    #[test]
    fn request_body_matches_wire_schema() {
        let q = Question::new("q1", "who?");
        let a = Passage::new("A", "Alpha", "first");
        let b = Passage::new("B", "Beta", "second");
        let reqs = [
            ScoreRequest::new(&q, vec![], &a),
            ScoreRequest::new(&q, vec![&a], &b),
        ];
        let json = serde_json::to_value(ScoreRequestBody::from_requests(&reqs)).unwrap();
        assert_eq!(
            json,
            serde_json::json!({"items":[
                {"head":1,"question":"who?","chain":[],"candidate":{"title":"Alpha","text":"first"}},
                {"head":2,"question":"who?","chain":[{"title":"Alpha","text":"first"}],
                 "candidate":{"title":"Beta","text":"second"}}
            ]})
        );
    }

    #[test]
    fn trailing_slash_is_trimmed() {
        assert_eq!(RemoteConfig::new("http://h:1/").url, "http://h:1");
    }
}
