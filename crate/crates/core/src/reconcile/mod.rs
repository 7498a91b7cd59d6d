//! The round-table protocol: per-round consensus, multi-round discussion and
//! convergence tracking.

mod consensus;
mod engine;
mod transcript;

pub use consensus::{consensus_of, select_consensus, tally, total_confidence, ConsensusResult};
pub use engine::{
    run_reconcile, run_round, ReconcileError, ReconcileOptions, RoundError, DEFAULT_DISCUSSION_ROUNDS,
};
pub use transcript::{
    convergence_counts, count_unanimous, read_transcripts, to_jsonl, verify_transcript, write_transcripts,
    DiscussionTranscript, Mismatch, RoundRecord, TranscriptError,
};
