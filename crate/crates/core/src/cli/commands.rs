use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use futures::stream::{self, StreamExt};
use serde::{Deserialize, Serialize};
use thiserror::Error;
use tokio::sync::Semaphore;

use super::config::RunConfig;
use crate::agents::{Agent, AgentError};
use crate::dataset::{group_by_reconstruction, load_dataset, Dataset, QuestionGroup};
use crate::metrics::{build_report, render_table, MetricsError, MetricsReport, PredictionSet};
use crate::prompts::{PromptTemplate, PromptTemplates, TemplateKind};
use crate::reconcile::{
    convergence_counts, read_transcripts, run_reconcile, to_jsonl, verify_transcript, DiscussionTranscript,
    Mismatch, ReconcileError, ReconcileOptions, RoundError,
};

pub const TRANSCRIPTS_FILE: &str = "transcripts.jsonl";
pub const PREDICTIONS_FILE: &str = "predictions.csv";
pub const REPORT_TEXT_FILE: &str = "report.txt";
pub const REPORT_JSON_FILE: &str = "report.json";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("transport error: {0}")]
    Transport(String),
    #[error("scoring error: {0}")]
    Scoring(String),
    #[error("integrity error: {} mismatch(es); first: {}", .0.len(), .0.first().map(ToString::to_string).unwrap_or_default())]
    Integrity(Vec<Mismatch>),
    #[error("i/o error: {0}")]
    Io(String),
}

impl CliError {
    /// Process exit status for this failure class.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io(_) => 1,
            CliError::Config(_) => 2,
            CliError::Transport(_) => 3,
            CliError::Scoring(_) => 4,
            CliError::Integrity(_) => 5,
        }
    }
}

impl From<MetricsError> for CliError {
    fn from(e: MetricsError) -> Self {
        CliError::Scoring(e.to_string())
    }
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|e| io_err(path, e))
}

/// Metrics plus per-round unanimity counts, as written to `report.json`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunReport {
    pub dataset: String,
    pub questions: usize,
    pub metrics: MetricsReport,
    /// `convergence[r]` = questions whose round `r` was unanimous.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub convergence: Vec<usize>,
}

impl RunReport {
    pub fn render_text(&self) -> String {
        let mut out = format!("dataset: {} ({} questions)\n\n", self.dataset, self.questions);
        out.push_str(&render_table(&[("Consensus".to_string(), self.metrics)]));
        if !self.convergence.is_empty() {
            out.push_str(&render_convergence(&self.convergence));
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }

    pub fn write(&self, dir: &Path) -> Result<(), CliError> {
        write_file(&dir.join(REPORT_TEXT_FILE), &self.render_text())?;
        write_file(&dir.join(REPORT_JSON_FILE), &self.to_json())
    }
}

fn render_convergence(counts: &[usize]) -> String {
    let mut out = String::from("\nround  unanimous\n");
    for (r, n) in counts.iter().enumerate() {
        let label = if r == 0 { "initial".to_string() } else { r.to_string() };
        let _ = writeln!(out, "{label:<7}{n:>9}");
    }
    out
}

fn load_groups(path: &Path) -> Result<(Dataset, Vec<QuestionGroup>), CliError> {
    let dataset = load_dataset(path).map_err(|e| CliError::Config(e.to_string()))?;
    let groups = group_by_reconstruction(&dataset).map_err(|e| CliError::Config(e.to_string()))?;
    Ok((dataset, groups))
}

pub fn load_templates(config: &RunConfig) -> Result<PromptTemplates, CliError> {
    let mut templates = PromptTemplates::default();
    if let Some(p) = &config.templates.initial {
        templates.initial = PromptTemplate::load(TemplateKind::Initial, p).map_err(|e| CliError::Config(e.to_string()))?;
    }
    if let Some(p) = &config.templates.discussion {
        templates.discussion =
            PromptTemplate::load(TemplateKind::Discussion, p).map_err(|e| CliError::Config(e.to_string()))?;
    }
    Ok(templates)
}

/// Builds every agent up front so configuration problems (including missing
/// credentials) surface before any request is sent.
pub fn build_agents(config: &RunConfig) -> Result<Vec<Agent>, CliError> {
    let limiter = Arc::new(Semaphore::new(config.concurrency));
    config
        .agents
        .iter()
        .enumerate()
        .map(|(i, spec)| {
            Agent::from_spec(spec.clone(), Some(limiter.clone()), config.seed.wrapping_add(i as u64))
                .map_err(|e| CliError::Config(e.to_string()))
        })
        .collect()
}

/// What a `run` produced.
#[derive(Debug)]
pub struct RunOutcome {
    pub out_dir: PathBuf,
    pub transcripts: Vec<DiscussionTranscript>,
    pub report: RunReport,
}

fn classify(e: &ReconcileError) -> CliError {
    match &e.source {
        RoundError::Agents { .. }
            if e.source.agent_errors().iter().all(|a| matches!(a, AgentError::Config { .. })) =>
        {
            CliError::Config(e.to_string())
        }
        RoundError::Agents { .. } => CliError::Transport(e.to_string()),
        RoundError::Prompt(_) | RoundError::NoAgents => CliError::Config(e.to_string()),
    }
}

/// Runs every question of the dataset through the round table and writes
/// transcripts, predictions and the report into `config.out`.
pub async fn cmd_run(config: &RunConfig) -> Result<RunOutcome, CliError> {
    config.validate().map_err(CliError::Config)?;
    let (dataset, groups) = load_groups(&config.dataset)?;
    let templates = load_templates(config)?;
    let agents = build_agents(config)?;
    fs::create_dir_all(&config.out).map_err(|e| io_err(&config.out, e))?;

    let options = ReconcileOptions {
        discussion_rounds: config.discussion_rounds,
        early_stop: config.early_stop,
    };
    // A shared reply queue only replays deterministically if questions run
    // one at a time.
    let sequential = agents.iter().any(|a| a.as_scripted().is_some_and(|s| s.is_sequential()));
    let in_flight = if sequential { 1 } else { config.concurrency };

    let results: Vec<Result<DiscussionTranscript, ReconcileError>> = stream::iter(&dataset.questions)
        .map(|q| run_reconcile(q, &agents, options, &templates))
        .buffered(in_flight)
        .collect()
        .await;

    let mut transcripts = Vec::with_capacity(results.len());
    let mut failures = Vec::new();
    for r in results {
        match r {
            Ok(t) => transcripts.push(t),
            Err(e) => {
                tracing::error!("{e}");
                failures.push(e);
            }
        }
    }

    write_file(&config.out.join(TRANSCRIPTS_FILE), &to_jsonl(&transcripts))?;
    let preds: PredictionSet = transcripts.iter().map(|t| (t.question_id.clone(), t.final_choice)).collect();
    let order: Vec<&str> = dataset.questions.iter().map(|q| q.id.as_str()).collect();
    write_file(&config.out.join(PREDICTIONS_FILE), &preds.to_csv(&order))?;

    if let Some(first) = failures.first() {
        let mut err = classify(first);
        if let CliError::Transport(msg) | CliError::Config(msg) = &mut err {
            if failures.len() > 1 {
                let _ = write!(msg, " (and {} more failed question(s))", failures.len() - 1);
            }
        }
        return Err(err);
    }

    let report = RunReport {
        dataset: dataset.name.clone(),
        questions: dataset.len(),
        metrics: build_report(&groups, &preds)?,
        convergence: convergence_counts(&transcripts),
    };
    report.write(&config.out)?;
    Ok(RunOutcome {
        out_dir: config.out.clone(),
        transcripts,
        report,
    })
}

fn load_transcripts(path: &Path) -> Result<Vec<DiscussionTranscript>, CliError> {
    read_transcripts(path).map_err(|e| CliError::Io(e.to_string()))
}

/// Re-derives every round's consensus from the stored responses and rebuilds
/// the report. Any disagreement is an integrity error.
pub fn cmd_replay(transcripts: &Path, dataset: &Path) -> Result<RunReport, CliError> {
    let transcripts = load_transcripts(transcripts)?;
    let (dataset, groups) = load_groups(dataset)?;
    let mismatches: Vec<Mismatch> = transcripts.iter().flat_map(verify_transcript).collect();
    if !mismatches.is_empty() {
        return Err(CliError::Integrity(mismatches));
    }
    for t in transcripts.iter().filter(|t| dataset.get(&t.question_id).is_none()) {
        tracing::warn!(question = %t.question_id, "transcript for a question not in the dataset");
    }
    let preds: PredictionSet = transcripts.iter().map(|t| (t.question_id.clone(), t.final_choice)).collect();
    Ok(RunReport {
        dataset: dataset.name.clone(),
        questions: dataset.len(),
        metrics: build_report(&groups, &preds)?,
        convergence: convergence_counts(&transcripts),
    })
}

pub fn cmd_score(predictions: &Path, dataset: &Path) -> Result<RunReport, CliError> {
    let preds = PredictionSet::load(predictions)?;
    let (dataset, groups) = load_groups(dataset)?;
    Ok(RunReport {
        dataset: dataset.name.clone(),
        questions: dataset.len(),
        metrics: build_report(&groups, &preds)?,
        convergence: Vec::new(),
    })
}

/// One row of the per-round breakdown.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoundRow {
    pub round_index: usize,
    /// Agent name, or `consensus`.
    pub model: String,
    pub metrics: MetricsReport,
}

/// Per-round metrics for each agent and for the consensus.
pub fn round_breakdown(transcripts: &[DiscussionTranscript], groups: &[QuestionGroup]) -> Result<Vec<RoundRow>, CliError> {
    let rounds = transcripts.iter().map(|t| t.rounds.len()).min().unwrap_or(0);
    let agents: Vec<String> = transcripts
        .first()
        .map(|t| t.rounds[0].responses.iter().map(|r| r.agent_name.clone()).collect())
        .unwrap_or_default();
    let mut rows = Vec::new();
    for r in 0..rounds {
        for (k, name) in agents.iter().enumerate() {
            let mut preds = PredictionSet::new();
            for t in transcripts {
                let response = t.rounds[r].responses.get(k).ok_or_else(|| {
                    CliError::Scoring(format!("transcript `{}` round {r} lacks agent `{name}`", t.question_id))
                })?;
                preds.insert_prediction(t.question_id.clone(), response.choice_index)?;
            }
            rows.push(RoundRow {
                round_index: r,
                model: name.clone(),
                metrics: build_report(groups, &preds)?,
            });
        }
        let consensus: PredictionSet = transcripts
            .iter()
            .map(|t| (t.question_id.clone(), t.rounds[r].consensus.winner_index))
            .collect();
        rows.push(RoundRow {
            round_index: r,
            model: "consensus".into(),
            metrics: build_report(groups, &consensus)?,
        });
    }
    Ok(rows)
}

pub fn render_breakdown(rows: &[RoundRow], convergence: &[usize]) -> String {
    let mut out = String::new();
    let mut current = None;
    let mut block: Vec<(String, MetricsReport)> = Vec::new();
    let flush = |out: &mut String, round: Option<usize>, block: &mut Vec<(String, MetricsReport)>| {
        if let Some(r) = round {
            let title = if r == 0 { "initial round".to_string() } else { format!("round {r}") };
            let _ = writeln!(out, "[{title}]");
            out.push_str(&render_table(block));
            out.push('\n');
        }
        block.clear();
    };
    for row in rows {
        if current != Some(row.round_index) {
            flush(&mut out, current, &mut block);
            current = Some(row.round_index);
        }
        block.push((row.model.clone(), row.metrics));
    }
    flush(&mut out, current, &mut block);
    if !convergence.is_empty() {
        out.push_str(render_convergence(convergence).trim_start());
    }
    out
}

/// Per-round, per-agent breakdown of a transcripts file.
pub fn cmd_report(transcripts: &Path, dataset: &Path) -> Result<(Vec<RoundRow>, String), CliError> {
    let transcripts = load_transcripts(transcripts)?;
    let (_, groups) = load_groups(dataset)?;
    let rows = round_breakdown(&transcripts, &groups)?;
    let text = render_breakdown(&rows, &convergence_counts(&transcripts));
    Ok((rows, text))
}
