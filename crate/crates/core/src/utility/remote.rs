//! Client for the HTTP scoring bridge (`POST /v1/score`, `GET /v1/health`).

use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{ScorePair, UtilityBackend};
use crate::error::{MbrError, Result};

#[derive(Debug, Clone)]
pub struct RemoteOptions {
    pub timeout: Duration,
    pub batch_size: usize,
    /// Attempts per request, including the first.
    pub attempts: usize,
    pub backoff: Duration,
}

impl Default for RemoteOptions {
    fn default() -> Self {
        RemoteOptions {
            timeout: Duration::from_secs(60),
            batch_size: 256,
            attempts: 3,
            backoff: Duration::from_millis(200),
        }
    }
}

#[derive(Serialize)]
struct WirePair<'a> {
    hypothesis: &'a str,
    reference: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    source: Option<&'a str>,
}

#[derive(Serialize)]
struct ScoreRequest<'a> {
    pairs: Vec<WirePair<'a>>,
}

#[derive(Deserialize)]
struct ScoreResponse {
    scores: Vec<f64>,
}

#[derive(Deserialize)]
struct HealthResponse {
    status: String,
    metric: String,
}

pub struct RemoteBackend {
    endpoint: String,
    name: String,
    agent: ureq::Agent,
    options: RemoteOptions,
}

enum Failure {
    /// Worth retrying: transport errors and 5xx responses.
    Transient(String),
    Fatal(MbrError),
}

impl RemoteBackend {
    /// Connects and checks `/v1/health`; the reported metric becomes the
    /// backend's name.
    pub fn connect(endpoint: &str, options: RemoteOptions) -> Result<Self> {
        if options.batch_size == 0 || options.attempts == 0 {
            return Err(MbrError::validation("remote batch size and attempts must be >= 1"));
        }
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(options.timeout))
            .http_status_as_error(false)
            .build()
            .into();
        let mut backend = RemoteBackend {
            endpoint: endpoint.trim_end_matches('/').to_string(),
            name: "remote".into(),
            agent,
            options,
        };
        let health: HealthResponse = backend.with_retries(|b| b.get_health())?;
        if health.status != "ok" {
            return Err(MbrError::Backend {
                backend: backend.endpoint.clone(),
                message: format!("health status `{}`", health.status),
            });
        }
        backend.name = health.metric;
        Ok(backend)
    }

    pub fn endpoint(&self) -> &str {
        &self.endpoint
    }

    fn with_retries<T>(&self, mut f: impl FnMut(&Self) -> std::result::Result<T, Failure>) -> Result<T> {
        let mut last = String::new();
        for attempt in 0..self.options.attempts {
            if attempt > 0 {
                thread::sleep(self.options.backoff * attempt as u32);
            }
            match f(self) {
                Ok(v) => return Ok(v),
                Err(Failure::Fatal(e)) => return Err(e),
                Err(Failure::Transient(msg)) => last = msg,
            }
        }
        Err(MbrError::Backend {
            backend: self.endpoint.clone(),
            message: format!("giving up after {} attempts: {last}", self.options.attempts),
        })
    }

    fn get_health(&self) -> std::result::Result<HealthResponse, Failure> {
        let url = format!("{}/v1/health", self.endpoint);
        let resp = self
            .agent
            .get(&url)
            .call()
            .map_err(|e| Failure::Transient(e.to_string()))?;
        let status = resp.status().as_u16();
        let mut body = resp.into_body();
        let text = body
            .read_to_string()
            .map_err(|e| Failure::Transient(e.to_string()))?;
        if status >= 500 {
            return Err(Failure::Transient(format!("HTTP {status}: {text}")));
        }
        if status != 200 {
            return Err(Failure::Fatal(MbrError::Protocol(format!(
                "GET {url}: HTTP {status}: {text}"
            ))));
        }
        serde_json::from_str(&text)
            .map_err(|e| Failure::Fatal(MbrError::Protocol(format!("GET {url}: {e}"))))
    }

    fn post_batch(&self, batch: &[ScorePair<'_>]) -> std::result::Result<Vec<f64>, Failure> {
        let url = format!("{}/v1/score", self.endpoint);
        let req = ScoreRequest {
            pairs: batch
                .iter()
                .map(|p| WirePair {
                    hypothesis: p.hypothesis,
                    reference: p.reference,
                    source: p.source,
                })
                .collect(),
        };
        let resp = self
            .agent
            .post(&url)
            .send_json(&req)
            .map_err(|e| Failure::Transient(e.to_string()))?;
        let status = resp.status().as_u16();
        let text = resp
            .into_body()
            .read_to_string()
            .map_err(|e| Failure::Transient(e.to_string()))?;
        if status >= 500 {
            return Err(Failure::Transient(format!("HTTP {status}: {text}")));
        }
        if status != 200 {
            return Err(Failure::Fatal(MbrError::Backend {
                backend: self.endpoint.clone(),
                message: format!("HTTP {status}: {text}"),
            }));
        }
        let parsed: ScoreResponse = serde_json::from_str(&text)
            .map_err(|e| Failure::Fatal(MbrError::Protocol(format!("POST {url}: {e}"))))?;
        if parsed.scores.len() != batch.len() {
            return Err(Failure::Fatal(MbrError::Protocol(format!(
                "POST {url}: {} scores for {} pairs",
                parsed.scores.len(),
                batch.len()
            ))));
        }
        Ok(parsed.scores)
    }
}

impl UtilityBackend for RemoteBackend {
    fn name(&self) -> &str {
        &self.name
    }

    fn score_pairs(&self, pairs: &[ScorePair<'_>]) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(pairs.len());
        for batch in pairs.chunks(self.options.batch_size) {
            out.extend(self.with_retries(|b| b.post_batch(batch))?);
        }
        Ok(out)
    }
}
