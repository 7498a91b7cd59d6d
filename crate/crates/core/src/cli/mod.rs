//! Library side of the `roundtable` command: configuration and the
//! `run` / `replay` / `score` / `report` subcommands.

mod commands;
mod config;

pub use commands::{
    build_agents, cmd_replay, cmd_report, cmd_run, cmd_score, load_templates, render_breakdown, round_breakdown,
    CliError, RoundRow, RunOutcome, RunReport, PREDICTIONS_FILE, REPORT_JSON_FILE, REPORT_TEXT_FILE,
    TRANSCRIPTS_FILE,
};
pub use config::{load_agents_file, Overrides, RunConfig, TemplatePaths};
