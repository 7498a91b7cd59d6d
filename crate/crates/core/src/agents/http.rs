//! Chat-completion agents over HTTP.

use std::sync::{Arc, Mutex};
use std::time::Duration;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use reqwest::StatusCode;
use serde_json::{json, Value};
use tokio::sync::Semaphore;

use super::spec::{AgentSpec, RetryPolicy};
use super::{AgentError, Reply};

/// Delay before retry number `attempt` (1-based count of failures so far):
/// half of the capped exponential step, plus uniform jitter over the other
/// half.
pub fn backoff_delay<R: Rng>(policy: &RetryPolicy, attempt: u32, rng: &mut R) -> Duration {
    let exp = policy
        .backoff_base_ms
        .saturating_mul(1u64 << attempt.saturating_sub(1).min(32));
    let step = exp.min(policy.backoff_max_ms.max(policy.backoff_base_ms));
    let half = step / 2;
    Duration::from_millis(half + rng.gen_range(0..=step - half))
}

enum Failure {
    Transient { status: Option<u16>, message: String },
    Fatal { status: Option<u16>, message: String },
}

#[derive(Debug)]
pub struct HttpChatAgent {
    spec: AgentSpec,
    endpoint: String,
    api_key: String,
    client: reqwest::Client,
    limiter: Option<Arc<Semaphore>>,
    rng: Mutex<ChaCha8Rng>,
}

impl HttpChatAgent {
    /// Reads the credential from the environment; fails before any request
    /// is made if it is missing.
    pub fn new(spec: AgentSpec, limiter: Option<Arc<Semaphore>>, seed: u64) -> Result<Self, AgentError> {
        let config_err = |reason: String| AgentError::Config {
            agent: spec.name.clone(),
            reason,
        };
        spec.validate().map_err(config_err)?;
        let var = spec.credential_env.clone().unwrap_or_default();
        let api_key = std::env::var(&var)
            .map_err(|_| config_err(format!("environment variable `{var}` is not set")))?;
        let endpoint = spec.endpoint.clone().unwrap_or_default();
        reqwest::Url::parse(&endpoint).map_err(|e| config_err(format!("bad endpoint `{endpoint}`: {e}")))?;
        let client = reqwest::Client::builder()
            .timeout(Duration::from_millis(spec.retry.timeout_ms))
            .build()
            .map_err(|e| config_err(e.to_string()))?;
        Ok(HttpChatAgent {
            endpoint,
            api_key,
            client,
            limiter,
            rng: Mutex::new(ChaCha8Rng::seed_from_u64(seed)),
            spec,
        })
    }

    pub fn spec(&self) -> &AgentSpec {
        &self.spec
    }

    fn request_body(&self, prompt: &str) -> Value {
        json!({
            "model": self.spec.model_id,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": self.spec.sampling.temperature,
            "max_tokens": self.spec.sampling.max_tokens,
        })
    }

    async fn attempt(&self, body: &Value) -> Result<String, Failure> {
        let _permit = match &self.limiter {
            Some(sem) => Some(sem.acquire().await.expect("request limiter closed")),
            None => None,
        };
        let resp = self
            .client
            .post(&self.endpoint)
            .bearer_auth(&self.api_key)
            .json(body)
            .send()
            .await
            .map_err(|e| Failure::Transient {
                status: e.status().map(|s| s.as_u16()),
                message: e.to_string(),
            })?;
        let status = resp.status();
        if status == StatusCode::TOO_MANY_REQUESTS || status.is_server_error() {
            return Err(Failure::Transient {
                status: Some(status.as_u16()),
                message: format!("HTTP {status}"),
            });
        }
        if !status.is_success() {
            let text = resp.text().await.unwrap_or_default();
            return Err(Failure::Fatal {
                status: Some(status.as_u16()),
                message: format!("HTTP {status}: {}", text.chars().take(300).collect::<String>()),
            });
        }
        let payload: Value = resp.json().await.map_err(|e| Failure::Transient {
            status: Some(status.as_u16()),
            message: format!("unreadable response body: {e}"),
        })?;
        extract_completion_text(&payload).ok_or_else(|| Failure::Fatal {
            status: Some(status.as_u16()),
            message: "response has no completion text".into(),
        })
    }

    pub async fn query(&self, prompt: &str) -> Result<Reply, AgentError> {
        let body = self.request_body(prompt);
        let max = self.spec.retry.max_attempts.max(1);
        let mut attempts = 0;
        loop {
            attempts += 1;
            match self.attempt(&body).await {
                Ok(text) => return Ok(Reply { text, attempts }),
                Err(Failure::Fatal { status, message }) => {
                    return Err(AgentError::Transport {
                        agent: self.spec.name.clone(),
                        attempts,
                        status,
                        message,
                    })
                }
                Err(Failure::Transient { status, message }) => {
                    if attempts >= max {
                        return Err(AgentError::Transport {
                            agent: self.spec.name.clone(),
                            attempts,
                            status,
                            message,
                        });
                    }
                    let delay = {
                        let mut rng = self.rng.lock().expect("rng lock poisoned");
                        backoff_delay(&self.spec.retry, attempts, &mut *rng)
                    };
                    tracing::warn!(
                        agent = %self.spec.name, attempt = attempts, ?status, ?delay,
                        "transient failure, retrying: {message}"
                    );
                    tokio::time::sleep(delay).await;
                }
            }
        }
    }
}

/// Text of the first completion choice, accepting both chat (`message`) and
/// legacy (`text`) shapes.
pub fn extract_completion_text(payload: &Value) -> Option<String> {
    let first = payload.get("choices")?.get(0)?;
    first
        .pointer("/message/content")
        .or_else(|| first.get("text"))
        .and_then(Value::as_str)
        .map(str::to_string)
}
