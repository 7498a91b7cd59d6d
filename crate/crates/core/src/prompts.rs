//! Initial-round and discussion-round prompt rendering.
//!
//! Templates are plain text with `{name}` placeholders. Recognised names are
//! `question`, `choices` and (discussion only) `peer_block`. Any other
//! `{identifier}` is rejected; braces around anything else (such as a JSON
//! example) are left alone.

use std::fmt::Write as _;
use std::path::Path;
use std::sync::OnceLock;

use regex::Regex;
use thiserror::Error;

use crate::agents::AgentResponse;
use crate::dataset::{ChoiceIndex, Question};

pub const DEFAULT_INITIAL: &str = include_str!("../templates/initial.txt");
pub const DEFAULT_DISCUSSION: &str = include_str!("../templates/discussion.txt");

const QUESTION: &str = "question";
const CHOICES: &str = "choices";
const PEER_BLOCK: &str = "peer_block";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TemplateKind {
    Initial,
    Discussion,
}

impl TemplateKind {
    fn required(self) -> &'static [&'static str] {
        match self {
            TemplateKind::Initial => &[QUESTION, CHOICES],
            TemplateKind::Discussion => &[QUESTION, CHOICES, PEER_BLOCK],
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PromptError {
    #[error("{kind:?} template does not reference {{{name}}}")]
    MissingPlaceholder { kind: TemplateKind, name: String },
    #[error("unresolved placeholder {{{0}}}")]
    Unresolved(String),
    #[error("expected a {expected:?} template, got {actual:?}")]
    WrongKind {
        expected: TemplateKind,
        actual: TemplateKind,
    },
    #[error("discussion prompt needs at least one prior response")]
    EmptyPrior,
    #[error("cannot read template {path}: {message}")]
    Io { path: String, message: String },
}

fn placeholder_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"\{([A-Za-z_][A-Za-z0-9_]*)\}").unwrap())
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PromptTemplate {
    kind: TemplateKind,
    body: String,
}

impl PromptTemplate {
    pub fn new(kind: TemplateKind, body: impl Into<String>) -> Result<Self, PromptError> {
        let body = body.into();
        let required = kind.required();
        for cap in placeholder_re().captures_iter(&body) {
            let name = &cap[1];
            if !required.contains(&name) {
                return Err(PromptError::Unresolved(name.to_string()));
            }
        }
        for name in required {
            if !placeholder_re().captures_iter(&body).any(|c| &c[1] == *name) {
                return Err(PromptError::MissingPlaceholder {
                    kind,
                    name: name.to_string(),
                });
            }
        }
        Ok(PromptTemplate { kind, body })
    }

    pub fn load(kind: TemplateKind, path: &Path) -> Result<Self, PromptError> {
        let body = std::fs::read_to_string(path).map_err(|e| PromptError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Self::new(kind, body)
    }

    pub fn kind(&self) -> TemplateKind {
        self.kind
    }

    pub fn body(&self) -> &str {
        &self.body
    }

    /// Single pass substitution; substituted text is never rescanned.
    fn fill(&self, lookup: impl Fn(&str) -> Option<String>) -> Result<String, PromptError> {
        let mut out = String::with_capacity(self.body.len() + 512);
        let mut last = 0;
        for cap in placeholder_re().captures_iter(&self.body) {
            let whole = cap.get(0).expect("match");
            out.push_str(&self.body[last..whole.start()]);
            let value = lookup(&cap[1]).ok_or_else(|| PromptError::Unresolved(cap[1].to_string()))?;
            out.push_str(&value);
            last = whole.end();
        }
        out.push_str(&self.body[last..]);
        Ok(out)
    }
}

/// The pair of templates a run uses.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PromptTemplates {
    pub initial: PromptTemplate,
    pub discussion: PromptTemplate,
}

impl Default for PromptTemplates {
    fn default() -> Self {
        PromptTemplates {
            initial: PromptTemplate::new(TemplateKind::Initial, DEFAULT_INITIAL).expect("default initial template"),
            discussion: PromptTemplate::new(TemplateKind::Discussion, DEFAULT_DISCUSSION)
                .expect("default discussion template"),
        }
    }
}

/// `A. ...` through `D. ...`, one per line.
pub fn render_choices(question: &Question) -> String {
    ChoiceIndex::ALL
        .iter()
        .map(|&c| format!("{}. {}", c.letter(), question.choice(c)))
        .collect::<Vec<_>>()
        .join("\n")
}

const NUMBER_WORDS: [&str; 20] = [
    "one", "two", "three", "four", "five", "six", "seven", "eight", "nine", "ten", "eleven", "twelve",
    "thirteen", "fourteen", "fifteen", "sixteen", "seventeen", "eighteen", "nineteen", "twenty",
];

/// Anonymous label for the agent at zero-based `position`: "Agent one", ...
pub fn agent_label(position: usize) -> String {
    match NUMBER_WORDS.get(position) {
        Some(word) => format!("Agent {word}"),
        None => format!("Agent {}", position + 1),
    }
}

/// One block per prior response, labelled by position only.
pub fn render_peer_block(prior: &[AgentResponse]) -> String {
    let mut out = String::new();
    for (i, r) in prior.iter().enumerate() {
        if i > 0 {
            out.push_str("\n\n");
        }
        let label = agent_label(i);
        match r.choice_index {
            Some(choice) => {
                let _ = write!(
                    out,
                    "{label}'s solution: {}\nReasoning: {}\nConfidence: {:.2}",
                    choice.letter(),
                    r.reasoning.trim(),
                    r.confidence
                );
            }
            None => {
                let _ = write!(
                    out,
                    "{label}'s solution: abstained (no valid answer)\nReasoning: none\nConfidence: {:.2}",
                    0.0
                );
            }
        }
    }
    out
}

pub fn render_initial_prompt(template: &PromptTemplate, question: &Question) -> Result<String, PromptError> {
    if template.kind != TemplateKind::Initial {
        return Err(PromptError::WrongKind {
            expected: TemplateKind::Initial,
            actual: template.kind,
        });
    }
    template.fill(|name| match name {
        QUESTION => Some(question.text.clone()),
        CHOICES => Some(render_choices(question)),
        _ => None,
    })
}

pub fn render_discussion_prompt(
    template: &PromptTemplate,
    question: &Question,
    prior: &[AgentResponse],
) -> Result<String, PromptError> {
    if template.kind != TemplateKind::Discussion {
        return Err(PromptError::WrongKind {
            expected: TemplateKind::Discussion,
            actual: template.kind,
        });
    }
    if prior.is_empty() {
        return Err(PromptError::EmptyPrior);
    }
    template.fill(|name| match name {
        QUESTION => Some(question.text.clone()),
        CHOICES => Some(render_choices(question)),
        PEER_BLOCK => Some(render_peer_block(prior)),
        _ => None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agents::parse_agent_response;
    use crate::dataset::Variant;

    fn boat() -> Question {
        Question {
            id: "boat".into(),
            group_id: "boat".into(),
            variant: Variant::Original,
            text: "If a boat is parked in a marina and tied to a nearby station, how did its owner found the boat a couple of hours later in the middle of the ocean?".into(),
            choices: [
                "The station wasn't fixed in the marina".into(),
                "The dolphins untied the knots.".into(),
                "The waves were powerful, which pushed the boat and the marina together.".into(),
                "None of above.".into(),
            ],
            answer_index: ChoiceIndex::new(0).unwrap(),
        }
    }

    fn response(name: &str, letter: &str, conf: f64) -> AgentResponse {
        parse_agent_response(
            name,
            &format!(r#"{{"choice":"{letter}","reasoning":"because {name}","confidence":{conf}}}"#),
        )
    }

    #[test]
    fn initial_contains_question_and_labelled_choices() {
        let t = PromptTemplates::default();
        let q = boat();
        let p = render_initial_prompt(&t.initial, &q).unwrap();
        assert!(p.contains("tied to a nearby station"));
        assert!(p.contains(&q.text));
        for (c, letter) in ChoiceIndex::ALL.iter().zip(["A. ", "B. ", "C. ", "D. "]) {
            assert!(p.contains(&format!("{letter}{}", q.choice(*c))));
        }
        assert!(p.contains("confidence"));
    }

    #[test]
    fn template_without_choices_is_rejected() {
        let err = PromptTemplate::new(TemplateKind::Initial, "Q: {question}").unwrap_err();
        assert_eq!(
            err,
            PromptError::MissingPlaceholder {
                kind: TemplateKind::Initial,
                name: "choices".into()
            }
        );
        assert!(PromptTemplate::new(TemplateKind::Discussion, "{question} {choices}").is_err());
    }

    #[test]
    fn unknown_placeholder_is_unresolved() {
        let err = PromptTemplate::new(TemplateKind::Initial, "{question} {choices} {hint}").unwrap_err();
        assert_eq!(err, PromptError::Unresolved("hint".into()));
        let err = PromptTemplate::new(TemplateKind::Initial, "{question} {choices} {peer_block}").unwrap_err();
        assert_eq!(err, PromptError::Unresolved("peer_block".into()));
    }

    #[test]
    fn json_braces_are_literal() {
        let t = PromptTemplate::new(TemplateKind::Initial, r#"{question}|{choices}|{"choice": "A"}"#).unwrap();
        let p = render_initial_prompt(&t, &boat()).unwrap();
        assert!(p.ends_with(r#"|{"choice": "A"}"#));
    }

    #[test]
    fn question_text_is_not_rescanned() {
        let t = PromptTemplates::default();
        let mut q = boat();
        q.text = "What is {choices}?".into();
        let p = render_initial_prompt(&t.initial, &q).unwrap();
        assert!(p.contains("What is {choices}?"));
    }

    #[test]
    fn discussion_has_one_block_per_peer() {
        let t = PromptTemplates::default();
        let prior = vec![response("gpt", "A", 1.0), response("claude", "B", 0.7), response("mixtral", "A", 0.85)];
        let p = render_discussion_prompt(&t.discussion, &boat(), &prior).unwrap();
        assert_eq!(p.matches("'s solution: ").count(), 3);
        for label in ["Agent one's", "Agent two's", "Agent three's"] {
            assert!(p.contains(label), "{label}");
        }
        assert!(p.contains("Confidence: 1.00"));
        assert!(p.contains("Confidence: 0.70"));
        assert!(p.contains("Confidence: 0.85"));
        assert!(p.contains(&render_initial_prompt(&t.initial, &boat()).unwrap()[..200]));
        for name in ["gpt", "claude", "mixtral"] {
            assert!(!p.contains(&format!("{name}'s")));
        }
    }

    #[test]
    fn single_peer_and_abstained_peer() {
        let t = PromptTemplates::default();
        let p = render_discussion_prompt(&t.discussion, &boat(), &[response("x", "C", 0.5)]).unwrap();
        assert_eq!(p.matches("'s solution: ").count(), 1);
        let abstained = parse_agent_response("y", "no idea");
        let p = render_discussion_prompt(&t.discussion, &boat(), &[abstained]).unwrap();
        assert!(p.contains("Agent one's solution: abstained"));
    }

    #[test]
    fn discussion_errors() {
        let t = PromptTemplates::default();
        assert_eq!(render_discussion_prompt(&t.discussion, &boat(), &[]), Err(PromptError::EmptyPrior));
        assert!(matches!(
            render_discussion_prompt(&t.initial, &boat(), &[response("x", "A", 1.0)]),
            Err(PromptError::WrongKind { .. })
        ));
        assert!(matches!(render_initial_prompt(&t.discussion, &boat()), Err(PromptError::WrongKind { .. })));
    }

    #[test]
    fn rendering_is_deterministic() {
        let t = PromptTemplates::default();
        let prior = vec![response("a", "D", 0.333)];
        let a = render_discussion_prompt(&t.discussion, &boat(), &prior).unwrap();
        let b = render_discussion_prompt(&t.discussion, &boat(), &prior).unwrap();
        assert_eq!(a, b);
        assert!(a.contains("Confidence: 0.33"));
    }

    #[test]
    fn labels() {
        assert_eq!(agent_label(0), "Agent one");
        assert_eq!(agent_label(2), "Agent three");
        assert_eq!(agent_label(25), "Agent 26");
    }
}
