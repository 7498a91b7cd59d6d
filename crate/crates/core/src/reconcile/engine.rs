//! Round execution: initial round, discussion rounds, final answer.

use futures::future::join_all;
use thiserror::Error;

use super::consensus::consensus_of;
use super::transcript::{DiscussionTranscript, RoundRecord};
use crate::agents::{parse_agent_response, Agent, AgentError, AgentResponse};
use crate::dataset::Question;
use crate::prompts::{render_discussion_prompt, render_initial_prompt, PromptError, PromptTemplates};

/// Default number of discussion rounds after the initial round.
pub const DEFAULT_DISCUSSION_ROUNDS: usize = 2;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ReconcileOptions {
    pub discussion_rounds: usize,
    /// Stop as soon as a round is unanimous.
    pub early_stop: bool,
}

impl Default for ReconcileOptions {
    fn default() -> Self {
        ReconcileOptions {
            discussion_rounds: DEFAULT_DISCUSSION_ROUNDS,
            early_stop: false,
        }
    }
}

#[derive(Debug, Error)]
pub enum RoundError {
    #[error("no agents configured")]
    NoAgents,
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error("round {round_index} of `{question_id}` failed: {}", first_failure(.outcomes))]
    Agents {
        question_id: String,
        round_index: usize,
        /// Every agent's outcome in agent order; successes are kept.
        outcomes: Vec<Result<AgentResponse, AgentError>>,
    },
}

fn first_failure(outcomes: &[Result<AgentResponse, AgentError>]) -> String {
    outcomes
        .iter()
        .find_map(|o| o.as_ref().err().map(ToString::to_string))
        .unwrap_or_default()
}

impl RoundError {
    pub fn agent_errors(&self) -> Vec<&AgentError> {
        match self {
            RoundError::Agents { outcomes, .. } => outcomes.iter().filter_map(|o| o.as_ref().err()).collect(),
            _ => Vec::new(),
        }
    }
}

#[derive(Debug, Error)]
#[error("reconcile of `{question_id}` stopped after {} completed round(s): {source}", completed.len())]
pub struct ReconcileError {
    pub question_id: String,
    /// Rounds that finished before the failure.
    pub completed: Vec<RoundRecord>,
    #[source]
    pub source: RoundError,
}

/// Runs one round. Round 0 when `prior` is `None`, otherwise the round after
/// `prior`, with `prior`'s responses shown to every agent. All agents are
/// queried concurrently and the round completes only when each has answered
/// or failed.
pub async fn run_round(
    question: &Question,
    agents: &[Agent],
    prior: Option<&RoundRecord>,
    templates: &PromptTemplates,
) -> Result<RoundRecord, RoundError> {
    if agents.is_empty() {
        return Err(RoundError::NoAgents);
    }
    let (round_index, prompt) = match prior {
        None => (0, render_initial_prompt(&templates.initial, question)?),
        Some(p) => (
            p.round_index + 1,
            render_discussion_prompt(&templates.discussion, question, &p.responses)?,
        ),
    };

    let queries = agents.iter().map(|agent| {
        let prompt = prompt.as_str();
        async move {
            let reply = agent.query(&question.id, prompt).await?;
            Ok(parse_agent_response(agent.name(), &reply.text))
        }
    });
    let outcomes: Vec<Result<AgentResponse, AgentError>> = join_all(queries).await;

    if outcomes.iter().any(Result::is_err) {
        return Err(RoundError::Agents {
            question_id: question.id.clone(),
            round_index,
            outcomes,
        });
    }
    let responses: Vec<AgentResponse> = outcomes.into_iter().map(Result::unwrap).collect();
    Ok(RoundRecord {
        round_index,
        consensus: consensus_of(&responses),
        responses,
    })
}

/// Runs the initial round and up to `options.discussion_rounds` discussion
/// rounds. The final choice is the last round's consensus.
pub async fn run_reconcile(
    question: &Question,
    agents: &[Agent],
    options: ReconcileOptions,
    templates: &PromptTemplates,
) -> Result<DiscussionTranscript, ReconcileError> {
    let mut rounds: Vec<RoundRecord> = Vec::with_capacity(options.discussion_rounds + 1);
    for _ in 0..=options.discussion_rounds {
        match run_round(question, agents, rounds.last(), templates).await {
            Ok(record) => {
                let stop = options.early_stop && record.consensus.unanimous;
                rounds.push(record);
                if stop {
                    break;
                }
            }
            Err(source) => {
                return Err(ReconcileError {
                    question_id: question.id.clone(),
                    completed: rounds,
                    source,
                })
            }
        }
    }
    let final_choice = rounds.last().expect("at least the initial round ran").consensus.winner_index;
    Ok(DiscussionTranscript {
        question_id: question.id.clone(),
        rounds,
        final_choice,
    })
}
