//! Multi-agent round-table consensus for multiple-choice brain teasers.
//!
//! Several answer agents each propose a choice, a reasoning and a confidence;
//! they see each other's answers over a fixed number of discussion rounds;
//! every round is settled by a confidence-weighted vote. Predictions are
//! scored with instance-based and group-based accuracy over the original,
//! semantic and context reconstructions of each puzzle.

pub mod agents;
pub mod cli;
pub mod dataset;
pub mod metrics;
pub mod prompts;
pub mod reconcile;
pub mod scalar;

pub use agents::{parse_agent_response, Agent, AgentError, AgentResponse, AgentSpec, Ballot, ParseStatus};
pub use dataset::{
    format_mc_sequences, group_by_reconstruction, load_dataset, ChoiceIndex, Dataset, Question, QuestionGroup,
    Variant,
};
pub use metrics::{build_report, group_accuracy, instance_accuracy, Cell, MetricsReport, PredictionSet};
pub use prompts::{render_discussion_prompt, render_initial_prompt, PromptTemplate, PromptTemplates};
pub use reconcile::{
    count_unanimous, run_reconcile, run_round, select_consensus, total_confidence, ConsensusResult,
    DiscussionTranscript, ReconcileOptions, RoundRecord,
};
pub use scalar::{Rational, Weight};

/// Consensus in the transcript scalar.
pub type Consensus = ConsensusResult<f64>;
/// Consensus in single precision.
pub type ConsensusF32 = ConsensusResult<f32>;
/// Consensus with exact rational totals.
pub type ExactConsensus = ConsensusResult<Rational>;
/// A vote weighted in `f64`.
pub type Vote = Ballot<f64>;
/// A vote with an exact rational weight.
pub type ExactVote = Ballot<Rational>;
