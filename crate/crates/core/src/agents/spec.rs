use std::path::PathBuf;

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgentKind {
    HttpChat,
    Scripted,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sampling {
    #[serde(default = "Sampling::default_temperature")]
    pub temperature: f64,
    #[serde(default = "Sampling::default_max_tokens")]
    pub max_tokens: u32,
}

impl Sampling {
    fn default_temperature() -> f64 {
        0.0
    }

    fn default_max_tokens() -> u32 {
        1024
    }
}

impl Default for Sampling {
    fn default() -> Self {
        Sampling {
            temperature: Self::default_temperature(),
            max_tokens: Self::default_max_tokens(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RetryPolicy {
    #[serde(default = "RetryPolicy::default_max_attempts")]
    pub max_attempts: u32,
    #[serde(default = "RetryPolicy::default_backoff_base_ms")]
    pub backoff_base_ms: u64,
    /// Cap on a single backoff sleep.
    #[serde(default = "RetryPolicy::default_backoff_max_ms")]
    pub backoff_max_ms: u64,
    /// Per-request timeout.
    #[serde(default = "RetryPolicy::default_timeout_ms")]
    pub timeout_ms: u64,
}

impl RetryPolicy {
    fn default_max_attempts() -> u32 {
        4
    }

    fn default_backoff_base_ms() -> u64 {
        500
    }

    fn default_backoff_max_ms() -> u64 {
        30_000
    }

    fn default_timeout_ms() -> u64 {
        120_000
    }
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            max_attempts: Self::default_max_attempts(),
            backoff_base_ms: Self::default_backoff_base_ms(),
            backoff_max_ms: Self::default_backoff_max_ms(),
            timeout_ms: Self::default_timeout_ms(),
        }
    }
}

/// Static description of one answer agent.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentSpec {
    pub name: String,
    pub kind: AgentKind,
    #[serde(default)]
    pub endpoint: Option<String>,
    #[serde(default)]
    pub model_id: String,
    /// Name of the environment variable holding the API key.
    #[serde(default)]
    pub credential_env: Option<String>,
    #[serde(default)]
    pub sampling: Sampling,
    #[serde(default)]
    pub retry: RetryPolicy,
    /// Script file for scripted agents.
    #[serde(default)]
    pub script: Option<PathBuf>,
}

impl AgentSpec {
    pub fn scripted(name: impl Into<String>) -> Self {
        AgentSpec {
            name: name.into(),
            kind: AgentKind::Scripted,
            endpoint: None,
            model_id: "scripted".into(),
            credential_env: None,
            sampling: Sampling::default(),
            retry: RetryPolicy::default(),
            script: None,
        }
    }

    pub fn http_chat(
        name: impl Into<String>,
        endpoint: impl Into<String>,
        model_id: impl Into<String>,
        credential_env: impl Into<String>,
    ) -> Self {
        AgentSpec {
            name: name.into(),
            kind: AgentKind::HttpChat,
            endpoint: Some(endpoint.into()),
            model_id: model_id.into(),
            credential_env: Some(credential_env.into()),
            sampling: Sampling::default(),
            retry: RetryPolicy::default(),
            script: None,
        }
    }

    /// Checks the fields that do not depend on the environment.
    pub fn validate(&self) -> Result<(), String> {
        if self.name.trim().is_empty() {
            return Err("agent name is empty".into());
        }
        if self.sampling.temperature.is_nan() || self.sampling.temperature < 0.0 {
            return Err(format!("agent `{}`: temperature must be >= 0", self.name));
        }
        if self.sampling.max_tokens == 0 {
            return Err(format!("agent `{}`: max_tokens must be positive", self.name));
        }
        if self.retry.max_attempts == 0 || self.retry.backoff_base_ms == 0 {
            return Err(format!(
                "agent `{}`: max_attempts and backoff_base_ms must be positive",
                self.name
            ));
        }
        if self.kind == AgentKind::HttpChat {
            if self.endpoint.as_deref().is_none_or(str::is_empty) {
                return Err(format!("agent `{}`: http_chat requires endpoint", self.name));
            }
            if self.credential_env.as_deref().is_none_or(str::is_empty) {
                return Err(format!("agent `{}`: http_chat requires credential_env", self.name));
            }
        }
        Ok(())
    }
}
