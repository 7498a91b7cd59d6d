//! Run configuration.
//!
//! The config file is TOML. Relative paths are resolved against the
//! directory containing the file. Example:
//!
//! ```toml
//! dataset = "data/sentence_puzzles_test.json"
//! discussion_rounds = 2
//! early_stop = false
//! concurrency = 4
//! out = "runs/reconcile"
//! seed = 255
//!
//! [templates]
//! initial = "templates/initial.txt"
//! discussion = "templates/discussion.txt"
//!
//! [[agents]]
//! name = "gpt"
//! kind = "http_chat"
//! endpoint = "https://api.openai.com/v1/chat/completions"
//! model_id = "gpt-3.5-turbo"
//! credential_env = "OPENAI_API_KEY"
//! sampling = { temperature = 0.7, max_tokens = 512 }
//! retry = { max_attempts = 5, backoff_base_ms = 1000 }
//!
//! [[agents]]
//! name = "replay"
//! kind = "scripted"
//! script = "scripts/replay.json"
//! ```
//!
//! Credentials never appear in the file; `credential_env` names the
//! environment variable that holds them.

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::agents::AgentSpec;
use crate::reconcile::DEFAULT_DISCUSSION_ROUNDS;

#[derive(Clone, Debug, Default, PartialEq, Eq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TemplatePaths {
    pub initial: Option<PathBuf>,
    pub discussion: Option<PathBuf>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    dataset: PathBuf,
    #[serde(default)]
    agents: Vec<AgentSpec>,
    #[serde(default = "default_rounds")]
    discussion_rounds: usize,
    #[serde(default)]
    templates: TemplatePaths,
    #[serde(default)]
    early_stop: bool,
    #[serde(default = "default_concurrency")]
    concurrency: usize,
    #[serde(default)]
    out: Option<PathBuf>,
    #[serde(default)]
    seed: u64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct AgentsFile {
    agents: Vec<AgentSpec>,
}

fn default_rounds() -> usize {
    DEFAULT_DISCUSSION_ROUNDS
}

fn default_concurrency() -> usize {
    4
}

/// Fully resolved settings for one `run`.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub dataset: PathBuf,
    pub agents: Vec<AgentSpec>,
    pub discussion_rounds: usize,
    pub templates: TemplatePaths,
    pub early_stop: bool,
    /// Global cap on in-flight HTTP requests.
    pub concurrency: usize,
    pub out: PathBuf,
    /// Seeds backoff jitter only.
    pub seed: u64,
}

/// Command-line overrides applied on top of the config file.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Overrides {
    pub rounds: Option<usize>,
    pub agents: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub concurrency: Option<usize>,
    pub early_stop: bool,
    pub seed: Option<u64>,
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

fn resolve_agents(base: &Path, agents: Vec<AgentSpec>) -> Vec<AgentSpec> {
    agents
        .into_iter()
        .map(|mut a| {
            a.script = a.script.map(|s| resolve(base, &s));
            a
        })
        .collect()
}

fn read(path: &Path) -> Result<String, String> {
    std::fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))
}

pub fn load_agents_file(path: &Path) -> Result<Vec<AgentSpec>, String> {
    let text = read(path)?;
    let file: AgentsFile = toml::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))?;
    let base = path.parent().unwrap_or(Path::new("."));
    Ok(resolve_agents(base, file.agents))
}

impl RunConfig {
    pub fn parse(text: &str, base: &Path) -> Result<Self, String> {
        let file: ConfigFile = toml::from_str(text).map_err(|e| e.to_string())?;
        Ok(RunConfig {
            dataset: resolve(base, &file.dataset),
            agents: resolve_agents(base, file.agents),
            discussion_rounds: file.discussion_rounds,
            templates: TemplatePaths {
                initial: file.templates.initial.map(|p| resolve(base, &p)),
                discussion: file.templates.discussion.map(|p| resolve(base, &p)),
            },
            early_stop: file.early_stop,
            concurrency: file.concurrency,
            out: file.out.map(|p| resolve(base, &p)).unwrap_or_else(|| base.join("out")),
            seed: file.seed,
        })
    }

    pub fn load(path: &Path) -> Result<Self, String> {
        let text = read(path)?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, base).map_err(|e| format!("{}: {e}", path.display()))
    }

    pub fn apply(&mut self, overrides: &Overrides) -> Result<(), String> {
        if let Some(r) = overrides.rounds {
            self.discussion_rounds = r;
        }
        if let Some(path) = &overrides.agents {
            self.agents = load_agents_file(path)?;
        }
        if let Some(out) = &overrides.out {
            self.out = out.clone();
        }
        if let Some(c) = overrides.concurrency {
            self.concurrency = c;
        }
        if overrides.early_stop {
            self.early_stop = true;
        }
        if let Some(s) = overrides.seed {
            self.seed = s;
        }
        Ok(())
    }

    /// Checks everything that can be checked without the network.
    pub fn validate(&self) -> Result<(), String> {
        if self.agents.is_empty() {
            return Err("at least one agent is required".into());
        }
        if self.concurrency == 0 {
            return Err("concurrency must be positive".into());
        }
        let mut names = HashSet::new();
        for a in &self.agents {
            a.validate()?;
            if !names.insert(a.name.as_str()) {
                return Err(format!("duplicate agent name `{}`", a.name));
            }
        }
        if !self.dataset.is_file() {
            return Err(format!("dataset {} not found", self.dataset.display()));
        }
        for p in [&self.templates.initial, &self.templates.discussion].into_iter().flatten() {
            if !p.is_file() {
                return Err(format!("template {} not found", p.display()));
            }
        }
        Ok(())
    }
}
