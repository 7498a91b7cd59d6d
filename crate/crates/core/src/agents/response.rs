//! Parsing raw agent replies into [`AgentResponse`].
//!
//! Two tiers: a JSON object (fenced or bare) with `choice`, `reasoning` and
//! `confidence`; failing that, a free-text scan for `Solution: <letter>` and
//! `Confidence: <number>`. Anything without a recoverable choice abstains.

use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::dataset::ChoiceIndex;
use crate::scalar::{weight_from_f64, Weight};

/// Confidence assigned when a reply names a choice but gives no usable
/// confidence value.
pub const MISSING_CONFIDENCE: f64 = 0.5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ParseStatus {
    Clean,
    Repaired,
    Abstained,
}

/// One agent's answer for one round.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AgentResponse {
    pub agent_name: String,
    /// `None` means the agent abstained.
    pub choice_index: Option<ChoiceIndex>,
    pub reasoning: String,
    pub confidence: f64,
    pub raw_text: String,
    pub parse_status: ParseStatus,
}

impl AgentResponse {
    pub fn abstain(agent_name: impl Into<String>, raw_text: impl Into<String>) -> Self {
        AgentResponse {
            agent_name: agent_name.into(),
            choice_index: None,
            reasoning: String::new(),
            confidence: 0.0,
            raw_text: raw_text.into(),
            parse_status: ParseStatus::Abstained,
        }
    }

    pub fn is_abstain(&self) -> bool {
        self.choice_index.is_none()
    }

    /// The response as a vote of weight `confidence` in scalar `W`.
    pub fn ballot<W: Weight>(&self) -> Ballot<W> {
        Ballot {
            choice: self.choice_index,
            weight: weight_from_f64(self.confidence),
        }
    }
}

/// A single weighted vote; `choice == None` contributes nothing.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Ballot<W> {
    pub choice: Option<ChoiceIndex>,
    pub weight: W,
}

impl<W> Ballot<W> {
    pub fn new(choice: Option<ChoiceIndex>, weight: W) -> Self {
        Ballot { choice, weight }
    }
}

fn fenced_block_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?s)```[A-Za-z]*[ \t]*\r?\n?(.*?)```").unwrap())
}

fn solution_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(r"(?i)\b(?:solution|answer|choice)\b[^\S\n]*(?:is)?[^\S\n]*[:=\-]?[^\S\n]*[(\[]?([A-D])\b").unwrap()
    })
}

fn confidence_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(r"(?i)\bconfidence(?:[^\S\n]+level)?[^\S\n]*(?:is)?[^\S\n]*[:=]?[^\S\n]*(-?\d+(?:\.\d+)?|-?\.\d+)[^\S\n]*(%)?").unwrap()
    })
}

/// Candidate JSON objects: fenced blocks first, then the whole reply, then
/// the outermost `{...}` span.
fn json_candidates(raw: &str) -> Vec<&str> {
    let mut out: Vec<&str> = fenced_block_re()
        .captures_iter(raw)
        .filter_map(|c| c.get(1).map(|m| m.as_str().trim()))
        .collect();
    out.push(raw.trim());
    if let (Some(start), Some(end)) = (raw.find('{'), raw.rfind('}')) {
        if start < end {
            out.push(&raw[start..=end]);
        }
    }
    out
}

fn choice_from_value(value: &Value) -> Option<ChoiceIndex> {
    match value {
        Value::String(s) => {
            let s = s.trim().trim_start_matches(['(', '[']);
            let mut chars = s.chars();
            let first = chars.next()?;
            // "A", "A.", "A: text" but not a word like "Apple".
            match chars.next() {
                Some(c) if c.is_alphanumeric() => None,
                _ => ChoiceIndex::from_letter(first),
            }
        }
        Value::Number(n) => n.as_u64().and_then(|i| ChoiceIndex::new(i as usize)),
        _ => None,
    }
}

fn confidence_from_value(value: &Value) -> Option<f64> {
    match value {
        Value::Number(n) => n.as_f64(),
        Value::String(s) => {
            let s = s.trim();
            match s.strip_suffix('%') {
                Some(pct) => pct.trim().parse::<f64>().ok().map(|p| p / 100.0),
                None => s.parse::<f64>().ok(),
            }
        }
        _ => None,
    }
    .filter(|c| c.is_finite())
}

struct Extracted {
    choice: ChoiceIndex,
    reasoning: String,
    confidence: Option<f64>,
    clean: bool,
}

fn extract_structured(raw: &str) -> Option<Extracted> {
    for candidate in json_candidates(raw) {
        let Ok(Value::Object(map)) = serde_json::from_str::<Value>(candidate) else {
            continue;
        };
        let get = |key: &str| {
            map.iter()
                .find(|(k, _)| k.eq_ignore_ascii_case(key))
                .map(|(_, v)| v)
        };
        let Some(choice) = get("choice").or_else(|| get("answer")).and_then(choice_from_value) else {
            continue;
        };
        let reasoning = get("reasoning").and_then(Value::as_str);
        let raw_conf = get("confidence");
        let confidence = raw_conf.and_then(confidence_from_value);
        let clean = reasoning.is_some() && matches!(raw_conf, Some(Value::Number(_))) && confidence.is_some();
        return Some(Extracted {
            choice,
            reasoning: reasoning.unwrap_or_default().to_string(),
            confidence,
            clean,
        });
    }
    None
}

fn extract_free_text(raw: &str) -> Option<Extracted> {
    let choice_match = solution_re().captures_iter(raw).last()?;
    let choice = ChoiceIndex::from_letter(choice_match[1].chars().next()?)?;
    let confidence = confidence_re().captures_iter(raw).last().and_then(|c| {
        let value: f64 = c[1].parse().ok()?;
        let value = if c.get(2).is_some() { value / 100.0 } else { value };
        value.is_finite().then_some(value)
    });
    let reasoning = reasoning_from_text(raw);
    Some(Extracted {
        choice,
        reasoning,
        confidence,
        clean: false,
    })
}

fn reasoning_from_text(raw: &str) -> String {
    static RE: OnceLock<Regex> = OnceLock::new();
    let re = RE.get_or_init(|| {
        Regex::new(r"(?is)\breason(?:ing)?\s*[:=]\s*(.*?)(?:\bconfidence\b|\z)").unwrap()
    });
    re.captures(raw)
        .and_then(|c| c.get(1))
        .map(|m| m.as_str().trim().to_string())
        .unwrap_or_else(|| raw.trim().to_string())
}

/// Parses a raw reply. Total: every input yields a valid response.
pub fn parse_agent_response(agent_name: &str, raw: &str) -> AgentResponse {
    let Some(found) = extract_structured(raw).or_else(|| extract_free_text(raw)) else {
        return AgentResponse::abstain(agent_name, raw);
    };

    let mut clean = found.clean;
    let confidence = match found.confidence {
        Some(c) if (0.0..=1.0).contains(&c) => c,
        Some(c) => {
            tracing::warn!(agent = agent_name, confidence = c, "clamping out-of-range confidence");
            clean = false;
            c.clamp(0.0, 1.0)
        }
        None => {
            tracing::warn!(agent = agent_name, "reply has no confidence; using default");
            clean = false;
            MISSING_CONFIDENCE
        }
    };
    // A zero-weight vote is indistinguishable from abstaining in the tally.
    if confidence == 0.0 {
        let mut response = AgentResponse::abstain(agent_name, raw);
        response.reasoning = found.reasoning;
        return response;
    }

    AgentResponse {
        agent_name: agent_name.to_string(),
        choice_index: Some(found.choice),
        reasoning: found.reasoning,
        confidence,
        raw_text: raw.to_string(),
        parse_status: if clean { ParseStatus::Clean } else { ParseStatus::Repaired },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn idx(i: usize) -> Option<ChoiceIndex> {
        ChoiceIndex::new(i)
    }

    #[test]
    fn clean_block() {
        let r = parse_agent_response("gpt", r#"{"choice":"A","reasoning":"...","confidence":1.0}"#);
        assert_eq!(r.choice_index, idx(0));
        assert_eq!(r.confidence, 1.0);
        assert_eq!(r.reasoning, "...");
        assert_eq!(r.parse_status, ParseStatus::Clean);
    }

    #[test]
    fn fenced_block_with_surrounding_text() {
        let raw = "Let me think.\n```json\n{\"choice\": \"D\", \"reasoning\": \"cops don't fight fires\", \"confidence\": 0.9}\n```\nDone.";
        let r = parse_agent_response("x", raw);
        assert_eq!(r.choice_index, idx(3));
        assert_eq!(r.confidence, 0.9);
        assert_eq!(r.parse_status, ParseStatus::Clean);
        assert_eq!(r.raw_text, raw);
    }

    #[test]
    fn solution_confidence_fallback() {
        let r = parse_agent_response("claude", "Solution: B ... Confidence: 0.7");
        assert_eq!(r.choice_index, idx(1));
        assert_eq!(r.confidence, 0.7);
        assert_eq!(r.parse_status, ParseStatus::Repaired);
    }

    #[test]
    fn fallback_table_style() {
        let raw = "Solution: A: No problem, because sturdy bricks are very hard to crack\nReasoning: It's the wall.\nConfidence 1.0";
        let r = parse_agent_response("x", raw);
        assert_eq!(r.choice_index, idx(0));
        assert_eq!(r.confidence, 1.0);
        assert_eq!(r.reasoning, "It's the wall.");
    }

    #[test]
    fn percent_confidence() {
        let r = parse_agent_response("x", "Answer: C\nConfidence: 85%");
        assert_eq!(r.choice_index, idx(2));
        assert!((r.confidence - 0.85).abs() < 1e-12);
    }

    #[test]
    fn unparseable_abstains() {
        let r = parse_agent_response("x", "I cannot decide.");
        assert_eq!(r.choice_index, None);
        assert_eq!(r.confidence, 0.0);
        assert_eq!(r.parse_status, ParseStatus::Abstained);
    }

    #[test]
    fn clamps_high_confidence() {
        let r = parse_agent_response("x", r#"{"choice":"C","confidence":1.7}"#);
        assert_eq!(r.choice_index, idx(2));
        assert_eq!(r.confidence, 1.0);
        assert_eq!(r.parse_status, ParseStatus::Repaired);
    }

    #[test]
    fn negative_confidence_abstains() {
        let r = parse_agent_response("x", r#"{"choice":"B","reasoning":"r","confidence":-0.3}"#);
        assert_eq!(r.parse_status, ParseStatus::Abstained);
        assert_eq!(r.confidence, 0.0);
    }

    #[test]
    fn missing_confidence_uses_default() {
        let r = parse_agent_response("x", r#"{"choice":"b","reasoning":"r"}"#);
        assert_eq!(r.choice_index, idx(1));
        assert_eq!(r.confidence, MISSING_CONFIDENCE);
        assert_eq!(r.parse_status, ParseStatus::Repaired);
    }

    #[test]
    fn word_starting_with_letter_is_not_a_choice() {
        let r = parse_agent_response("x", r#"{"choice":"Apple","confidence":0.4}"#);
        assert!(r.is_abstain());
    }

    #[test]
    fn invalid_json_choice_falls_back_to_text() {
        let r = parse_agent_response("x", "{\"choice\": \"Z\"}\nSolution: D\nConfidence: 0.6");
        assert_eq!(r.choice_index, idx(3));
        assert_eq!(r.parse_status, ParseStatus::Repaired);
    }

    fn check_invariants(r: &AgentResponse) {
        assert!((0.0..=1.0).contains(&r.confidence));
        let abstain = r.choice_index.is_none();
        assert_eq!(abstain, r.parse_status == ParseStatus::Abstained);
        assert_eq!(abstain, r.confidence == 0.0);
    }

    proptest! {
        #[test]
        fn total_and_idempotent(raw in ".*") {
            let a = parse_agent_response("p", &raw);
            check_invariants(&a);
            prop_assert_eq!(&a, &parse_agent_response("p", &raw));
        }

        #[test]
        fn structured_noise_never_panics(
            prefix in "[ -~\n]{0,40}",
            letter in "[A-Za-z]{0,2}",
            conf in proptest::num::f64::ANY,
            suffix in "[ -~\n]{0,40}",
        ) {
            let raw = format!("{prefix}```json\n{{\"choice\": \"{letter}\", \"confidence\": {conf}}}\n```{suffix}");
            check_invariants(&parse_agent_response("p", &raw));
        }

        #[test]
        fn clamping(c in -5.0f64..5.0) {
            let raw = format!(r#"{{"choice":"A","reasoning":"r","confidence":{c}}}"#);
            let r = parse_agent_response("p", &raw);
            let expected = c.clamp(0.0, 1.0);
            prop_assert_eq!(r.confidence, expected);
        }
    }
}
