//! Answer agents: remote chat-completion models and scripted stand-ins.

mod http;
mod response;
mod scripted;
mod spec;

use std::sync::Arc;

use thiserror::Error;
use tokio::sync::Semaphore;

pub use http::{backoff_delay, extract_completion_text, HttpChatAgent};
pub use response::{parse_agent_response, AgentResponse, Ballot, ParseStatus, MISSING_CONFIDENCE};
pub use scripted::{Script, ScriptedAgent};
pub use spec::{AgentKind, AgentSpec, RetryPolicy, Sampling};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AgentError {
    #[error("agent `{agent}` is misconfigured: {reason}")]
    Config { agent: String, reason: String },
    #[error("agent `{agent}` failed after {attempts} attempt(s) (status {status:?}): {message}")]
    Transport {
        agent: String,
        attempts: u32,
        status: Option<u16>,
        message: String,
    },
    #[error("script for agent `{agent}` exhausted at question `{question_id}`")]
    ScriptExhausted { agent: String, question_id: String },
}

/// Raw completion text plus the number of attempts it took.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Reply {
    pub text: String,
    pub attempts: u32,
}

// Only a handful exist per run, so the size gap is irrelevant.
#[allow(clippy::large_enum_variant)]
#[derive(Debug)]
pub enum Agent {
    Http(HttpChatAgent),
    Scripted(ScriptedAgent),
}

impl Agent {
    /// Builds an agent from its spec. Scripted agents load `spec.script`;
    /// HTTP agents resolve their credential now.
    pub fn from_spec(spec: AgentSpec, limiter: Option<Arc<Semaphore>>, seed: u64) -> Result<Self, AgentError> {
        match spec.kind {
            AgentKind::HttpChat => Ok(Agent::Http(HttpChatAgent::new(spec, limiter, seed)?)),
            AgentKind::Scripted => {
                let config_err = |reason: String| AgentError::Config {
                    agent: spec.name.clone(),
                    reason,
                };
                spec.validate().map_err(config_err)?;
                let path = spec
                    .script
                    .as_deref()
                    .ok_or_else(|| config_err("scripted agent requires `script`".into()))?;
                let script = Script::load(path).map_err(config_err)?;
                make_scripted_agent(&spec.name, script)
            }
        }
    }

    pub fn name(&self) -> &str {
        match self {
            Agent::Http(a) => &a.spec().name,
            Agent::Scripted(a) => a.name(),
        }
    }

    pub async fn query(&self, question_id: &str, prompt: &str) -> Result<Reply, AgentError> {
        match self {
            Agent::Http(a) => a.query(prompt).await,
            Agent::Scripted(a) => a.next_reply(question_id, prompt).map(|text| Reply { text, attempts: 1 }),
        }
    }

    pub fn as_scripted(&self) -> Option<&ScriptedAgent> {
        match self {
            Agent::Scripted(a) => Some(a),
            Agent::Http(_) => None,
        }
    }
}

/// A scripted agent; the script must hold at least one reply.
pub fn make_scripted_agent(name: &str, script: Script) -> Result<Agent, AgentError> {
    if script.is_empty() {
        return Err(AgentError::Config {
            agent: name.to_string(),
            reason: "script is empty".into(),
        });
    }
    Ok(Agent::Scripted(ScriptedAgent::new(name, script)))
}

/// Shorthand for a sequential script.
pub fn scripted<I, S>(name: &str, replies: I) -> Result<Agent, AgentError>
where
    I: IntoIterator<Item = S>,
    S: Into<String>,
{
    make_scripted_agent(name, Script::Sequence(replies.into_iter().map(Into::into).collect()))
}
