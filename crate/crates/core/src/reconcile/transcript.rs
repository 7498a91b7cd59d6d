//! Discussion transcripts, their JSONL persistence, and integrity checks.

use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::consensus::{consensus_of, ConsensusResult};
use crate::agents::{parse_agent_response, AgentResponse};
use crate::dataset::ChoiceIndex;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub round_index: usize,
    pub responses: Vec<AgentResponse>,
    pub consensus: ConsensusResult<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiscussionTranscript {
    pub question_id: String,
    pub rounds: Vec<RoundRecord>,
    pub final_choice: ChoiceIndex,
}

impl DiscussionTranscript {
    pub fn round(&self, index: usize) -> Option<&RoundRecord> {
        self.rounds.get(index)
    }

    pub fn last_round(&self) -> &RoundRecord {
        self.rounds.last().expect("transcript has at least one round")
    }
}

#[derive(Debug, Error)]
pub enum TranscriptError {
    #[error("cannot access transcripts {path}: {message}")]
    Io { path: String, message: String },
    #[error("transcripts line {line}: {message}")]
    Schema { line: usize, message: String },
    #[error("transcript `{question_id}` has no round {round_index}")]
    MissingRound { question_id: String, round_index: usize },
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> TranscriptError {
    TranscriptError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    }
}

/// One JSON object per line, in the given order.
pub fn to_jsonl(transcripts: &[DiscussionTranscript]) -> String {
    let mut out = String::new();
    for t in transcripts {
        out.push_str(&serde_json::to_string(t).expect("transcript serializes"));
        out.push('\n');
    }
    out
}

pub fn write_transcripts(path: &Path, transcripts: &[DiscussionTranscript]) -> Result<(), TranscriptError> {
    let mut file = fs::File::create(path).map_err(|e| io_err(path, e))?;
    file.write_all(to_jsonl(transcripts).as_bytes()).map_err(|e| io_err(path, e))
}

pub fn read_transcripts(path: &Path) -> Result<Vec<DiscussionTranscript>, TranscriptError> {
    let file = fs::File::open(path).map_err(|e| io_err(path, e))?;
    let mut out = Vec::new();
    for (n, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| io_err(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let t: DiscussionTranscript = serde_json::from_str(&line).map_err(|e| TranscriptError::Schema {
            line: n + 1,
            message: e.to_string(),
        })?;
        if t.rounds.is_empty() {
            return Err(TranscriptError::Schema {
                line: n + 1,
                message: format!("transcript `{}` has no rounds", t.question_id),
            });
        }
        out.push(t);
    }
    Ok(out)
}

/// Number of transcripts whose round `round_index` was unanimous.
pub fn count_unanimous(transcripts: &[DiscussionTranscript], round_index: usize) -> Result<usize, TranscriptError> {
    let mut count = 0;
    for t in transcripts {
        let round = t.round(round_index).ok_or_else(|| TranscriptError::MissingRound {
            question_id: t.question_id.clone(),
            round_index,
        })?;
        count += usize::from(round.consensus.unanimous);
    }
    Ok(count)
}

/// Unanimity counts for every round index present in all transcripts.
pub fn convergence_counts(transcripts: &[DiscussionTranscript]) -> Vec<usize> {
    let common = transcripts.iter().map(|t| t.rounds.len()).min().unwrap_or(0);
    let longest = transcripts.iter().map(|t| t.rounds.len()).max().unwrap_or(0);
    if common != longest {
        tracing::warn!(common, longest, "transcripts differ in length; convergence table truncated");
    }
    (0..common)
        .map(|r| count_unanimous(transcripts, r).expect("round present in every transcript"))
        .collect()
}

/// A disagreement between what a transcript stores and what the engine
/// recomputes from it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Mismatch {
    pub question_id: String,
    pub round_index: Option<usize>,
    pub detail: String,
}

impl std::fmt::Display for Mismatch {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self.round_index {
            Some(r) => write!(f, "question `{}` round {}: {}", self.question_id, r, self.detail),
            None => write!(f, "question `{}`: {}", self.question_id, self.detail),
        }
    }
}

/// Recomputes every round's consensus from the stored responses, re-parses
/// every raw reply, and checks the structural invariants.
pub fn verify_transcript(t: &DiscussionTranscript) -> Vec<Mismatch> {
    let mut out = Vec::new();
    let mut push = |round: Option<usize>, detail: String| {
        out.push(Mismatch {
            question_id: t.question_id.clone(),
            round_index: round,
            detail,
        })
    };
    if t.rounds.is_empty() {
        push(None, "no rounds".into());
        return out;
    }
    let agent_order: Vec<&str> = t.rounds[0].responses.iter().map(|r| r.agent_name.as_str()).collect();
    for (i, round) in t.rounds.iter().enumerate() {
        if round.round_index != i {
            push(Some(i), format!("stored round_index {} at position {i}", round.round_index));
        }
        let order: Vec<&str> = round.responses.iter().map(|r| r.agent_name.as_str()).collect();
        if order != agent_order {
            push(Some(i), "agent order differs from round 0".into());
        }
        for r in &round.responses {
            let reparsed = parse_agent_response(&r.agent_name, &r.raw_text);
            if &reparsed != r {
                push(Some(i), format!("agent `{}` response does not match its raw text", r.agent_name));
            }
        }
        let recomputed = consensus_of::<f64>(&round.responses);
        if recomputed != round.consensus {
            push(
                Some(i),
                format!(
                    "stored consensus {:?} (winner {}) but recomputed {:?} (winner {})",
                    round.consensus.total_confidence,
                    round.consensus.winner_index,
                    recomputed.total_confidence,
                    recomputed.winner_index
                ),
            );
        }
    }
    let last = t.last_round().consensus.winner_index;
    if t.final_choice != last {
        push(None, format!("final_choice {} differs from last-round winner {last}", t.final_choice));
    }
    out
}
