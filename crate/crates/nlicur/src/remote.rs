//! HTTP client for a remote entailment scorer.
//!
//! Wire protocol: `POST {endpoint}/score` with
//! `{"pairs":[{"premise":..,"hypothesis":..}]}`, answered by `{"scores":[..]}`
//! holding one score per pair in request order.

use std::sync::atomic::{AtomicU64, Ordering};
use std::thread;
use std::time::Duration;

use nlicur_core::entailment::{Pair, ScoreError, Scorer};
use serde::{Deserialize, Serialize};

pub const DEFAULT_REMOTE_ID: &str = "remote";

#[derive(Debug, Clone, PartialEq)]
pub struct RemoteConfig {
    /// Base URL; `/score` is appended.
    pub endpoint: String,
    /// Retries after the first attempt for transient failures.
    pub max_retries: u32,
    pub initial_backoff: Duration,
    pub max_backoff: Duration,
    /// Whole-request timeout.
    pub timeout: Duration,
    /// Recorded as `scorer_id` on annotations.
    pub scorer_id: String,
}

impl RemoteConfig {
    pub fn new(endpoint: impl Into<String>) -> Self {
        Self {
            endpoint: endpoint.into(),
            max_retries: 5,
            initial_backoff: Duration::from_millis(200),
            max_backoff: Duration::from_secs(5),
            timeout: Duration::from_secs(120),
            scorer_id: DEFAULT_REMOTE_ID.to_string(),
        }
    }

    /// Delay before retry number `attempt` (0-based): doubling from the
    /// initial backoff, capped at the maximum.
    pub fn backoff(&self, attempt: u32) -> Duration {
        let factor = 1u32.checked_shl(attempt.min(31)).unwrap_or(u32::MAX);
        self.initial_backoff
            .saturating_mul(factor)
            .min(self.max_backoff)
    }
}

#[derive(Serialize)]
struct WirePair<'a> {
    premise: &'a str,
    hypothesis: &'a str,
}

#[derive(Serialize)]
struct Request<'a> {
    pairs: Vec<WirePair<'a>>,
}

#[derive(Deserialize)]
struct Response {
    scores: Vec<f64>,
}

/// Outcome of a single HTTP attempt.
enum Attempt {
    Done(Vec<f64>),
    Transient(String),
    Fatal(ScoreError),
}

pub struct RemoteScorer {
    agent: ureq::Agent,
    url: String,
    config: RemoteConfig,
    retries: AtomicU64,
    requests: AtomicU64,
}

impl RemoteScorer {
    pub fn new(config: RemoteConfig) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(config.timeout))
            .build()
            .into();
        let url = format!("{}/score", config.endpoint.trim_end_matches('/'));
        Self {
            agent,
            url,
            config,
            retries: AtomicU64::new(0),
            requests: AtomicU64::new(0),
        }
    }

    pub fn config(&self) -> &RemoteConfig {
        &self.config
    }

    /// Retries performed so far, across all requests.
    pub fn retry_count(&self) -> u64 {
        self.retries.load(Ordering::Relaxed)
    }

    /// Logical requests issued so far (retries not counted).
    pub fn request_count(&self) -> u64 {
        self.requests.load(Ordering::Relaxed)
    }

    fn attempt(&self, body: &Request<'_>, request_id: &str, expected: usize) -> Attempt {
        let mut resp = match self
            .agent
            .post(&self.url)
            .header("x-request-id", request_id)
            .send_json(body)
        {
            Ok(r) => r,
            Err(e) => return Attempt::Transient(e.to_string()),
        };
        let status = resp.status().as_u16();
        if status == 429 || status >= 500 {
            return Attempt::Transient(format!("status {status}"));
        }
        if !(200..300).contains(&status) {
            let message = resp.body_mut().read_to_string().unwrap_or_default();
            return Attempt::Fatal(ScoreError::Rejected { status, message });
        }
        let parsed: Response = match resp.body_mut().read_json() {
            Ok(r) => r,
            Err(e) => {
                return Attempt::Fatal(ScoreError::Rejected {
                    status,
                    message: format!("malformed response body: {e}"),
                })
            }
        };
        if parsed.scores.len() != expected {
            return Attempt::Fatal(ScoreError::LengthMismatch {
                expected,
                got: parsed.scores.len(),
            });
        }
        Attempt::Done(parsed.scores)
    }
}

impl Scorer for RemoteScorer {
    fn id(&self) -> &str {
        &self.config.scorer_id
    }

    fn score_batch(&self, pairs: &[Pair<'_>]) -> Result<Vec<f64>, ScoreError> {
        if pairs.is_empty() {
            return Ok(Vec::new());
        }
        if let Some(index) = pairs
            .iter()
            .position(|p| p.premise.trim().is_empty() || p.hypothesis.trim().is_empty())
        {
            return Err(ScoreError::EmptyInput { index });
        }
        let body = Request {
            pairs: pairs
                .iter()
                .map(|p| WirePair {
                    premise: p.premise,
                    hypothesis: p.hypothesis,
                })
                .collect(),
        };
        let request_id = format!("nlicur-{}", self.requests.fetch_add(1, Ordering::Relaxed));
        let mut attempt = 0;
        loop {
            match self.attempt(&body, &request_id, pairs.len()) {
                Attempt::Done(scores) => return Ok(scores),
                Attempt::Fatal(e) => return Err(e),
                Attempt::Transient(msg) if attempt >= self.config.max_retries => {
                    return Err(ScoreError::Unavailable(format!(
                        "{} after {} retries: {msg}",
                        self.url, attempt
                    )))
                }
                Attempt::Transient(_) => {
                    thread::sleep(self.config.backoff(attempt));
                    self.retries.fetch_add(1, Ordering::Relaxed);
                    attempt += 1;
                }
            }
        }
    }
}
