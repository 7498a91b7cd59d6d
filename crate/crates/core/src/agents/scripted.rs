//! Deterministic playback agents.

use std::collections::{HashMap, VecDeque};
use std::path::Path;
use std::sync::Mutex;

use serde::Deserialize;

use super::AgentError;

/// Replies in file or test form: either one queue consumed across all
/// questions, or one queue per question id.
#[derive(Clone, Debug, PartialEq, Eq, Deserialize)]
#[serde(untagged)]
pub enum Script {
    Sequence(Vec<String>),
    PerQuestion(HashMap<String, Vec<String>>),
}

impl Script {
    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| format!("cannot read script {}: {e}", path.display()))?;
        serde_json::from_str(&text).map_err(|e| {
            format!(
                "script {} must be a JSON array of strings or an object of string arrays: {e}",
                path.display()
            )
        })
    }

    pub fn is_empty(&self) -> bool {
        match self {
            Script::Sequence(v) => v.is_empty(),
            Script::PerQuestion(m) => m.values().all(Vec::is_empty),
        }
    }

    /// True when replies are consumed in global order regardless of question.
    pub fn is_sequential(&self) -> bool {
        matches!(self, Script::Sequence(_))
    }
}

#[derive(Debug, Default)]
struct Playback {
    shared: VecDeque<String>,
    keyed: HashMap<String, VecDeque<String>>,
    prompts: Vec<(String, String)>,
}

/// Replays canned replies in FIFO order. Concurrent queries are serialized.
#[derive(Debug)]
pub struct ScriptedAgent {
    name: String,
    sequential: bool,
    state: Mutex<Playback>,
}

impl ScriptedAgent {
    pub fn new(name: impl Into<String>, script: Script) -> Self {
        let sequential = script.is_sequential();
        let mut playback = Playback::default();
        match script {
            Script::Sequence(v) => playback.shared = v.into(),
            Script::PerQuestion(m) => {
                playback.keyed = m.into_iter().map(|(k, v)| (k, v.into())).collect();
            }
        }
        ScriptedAgent {
            name: name.into(),
            sequential,
            state: Mutex::new(playback),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn is_sequential(&self) -> bool {
        self.sequential
    }

    pub fn next_reply(&self, question_id: &str, prompt: &str) -> Result<String, AgentError> {
        let mut state = self.state.lock().expect("scripted agent lock poisoned");
        state.prompts.push((question_id.to_string(), prompt.to_string()));
        let reply = match state.keyed.get_mut(question_id) {
            Some(queue) => queue.pop_front(),
            None => state.shared.pop_front(),
        };
        reply.ok_or_else(|| AgentError::ScriptExhausted {
            agent: self.name.clone(),
            question_id: question_id.to_string(),
        })
    }

    /// Every `(question_id, prompt)` received so far, in arrival order.
    pub fn received_prompts(&self) -> Vec<(String, String)> {
        self.state.lock().expect("scripted agent lock poisoned").prompts.clone()
    }

    pub fn remaining(&self) -> usize {
        let state = self.state.lock().expect("scripted agent lock poisoned");
        state.shared.len() + state.keyed.values().map(VecDeque::len).sum::<usize>()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fifo_playback() {
        let agent = ScriptedAgent::new("s", Script::Sequence(vec!["1".into(), "2".into(), "3".into()]));
        let got: Vec<String> = (0..3).map(|_| agent.next_reply("q", "p").unwrap()).collect();
        assert_eq!(got, ["1", "2", "3"]);
        assert_eq!(agent.remaining(), 0);
    }

    #[test]
    fn exhaustion_is_an_error() {
        let agent = ScriptedAgent::new("s", Script::Sequence(vec!["only".into()]));
        agent.next_reply("q", "p").unwrap();
        assert!(matches!(agent.next_reply("q", "p"), Err(AgentError::ScriptExhausted { .. })));
    }

    #[test]
    fn per_question_queues() {
        let script: Script = serde_json::from_str(r#"{"q1": ["a1", "a2"], "q2": ["b1"]}"#).unwrap();
        assert!(!script.is_sequential());
        let agent = ScriptedAgent::new("s", script);
        assert_eq!(agent.next_reply("q2", "p").unwrap(), "b1");
        assert_eq!(agent.next_reply("q1", "p").unwrap(), "a1");
        assert_eq!(agent.next_reply("q1", "p").unwrap(), "a2");
        assert!(agent.next_reply("q3", "p").is_err());
        assert_eq!(agent.received_prompts().len(), 4);
    }
}
