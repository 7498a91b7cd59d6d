//! Brain-teaser dataset: loading, validation, reconstruction groups and the
//! cross-encoder input formatter.
//!
//! The on-disk format is a UTF-8 JSON array of records:
//!
//! ```text
//! {"id": "SP-1", "group_id": "SP-1", "variant": "original",
//!  "question": "...", "choices": ["..", "..", "..", ".."], "answer_index": 2}
//! ```
//!
//! `variant` is one of `original`, `semantic` or `context`. Unknown keys are
//! ignored with a warning.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

/// Number of answer options on every question.
pub const NUM_CHOICES: usize = 4;

const LETTERS: [char; NUM_CHOICES] = ['A', 'B', 'C', 'D'];

/// Index of an answer option, always in `0..4`. Serialized as a bare integer.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct ChoiceIndex(u8);

impl ChoiceIndex {
    pub const ALL: [ChoiceIndex; NUM_CHOICES] =
        [ChoiceIndex(0), ChoiceIndex(1), ChoiceIndex(2), ChoiceIndex(3)];

    pub fn new(index: usize) -> Option<Self> {
        (index < NUM_CHOICES).then_some(ChoiceIndex(index as u8))
    }

    /// Maps `A`..`D` (either case) to `0..4`.
    pub fn from_letter(letter: char) -> Option<Self> {
        let upper = letter.to_ascii_uppercase();
        LETTERS.iter().position(|&l| l == upper).and_then(Self::new)
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub fn letter(self) -> char {
        LETTERS[self.index()]
    }
}

impl TryFrom<u8> for ChoiceIndex {
    type Error = String;

    fn try_from(value: u8) -> Result<Self, Self::Error> {
        ChoiceIndex::new(value as usize)
            .ok_or_else(|| format!("choice index {value} out of range 0..{NUM_CHOICES}"))
    }
}

impl From<ChoiceIndex> for u8 {
    fn from(value: ChoiceIndex) -> Self {
        value.0
    }
}

impl fmt::Display for ChoiceIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.letter())
    }
}

/// Which reconstruction of a puzzle a question is.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Original,
    Semantic,
    Context,
}

impl Variant {
    pub const ALL: [Variant; 3] = [Variant::Original, Variant::Semantic, Variant::Context];

    pub fn as_str(self) -> &'static str {
        match self {
            Variant::Original => "original",
            Variant::Semantic => "semantic",
            Variant::Context => "context",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("cannot read dataset {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("dataset is not a JSON array of records: {0}")]
    NotAnArray(String),
    #[error("invalid record `{id}`: {reason}")]
    Schema { id: String, reason: String },
    #[error("duplicate question id `{0}`")]
    DuplicateId(String),
    #[error("group `{group_id}` has more than one {variant} question")]
    DuplicateVariant { group_id: String, variant: Variant },
}

/// One puzzle instance with its four options.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Question {
    pub id: String,
    pub group_id: String,
    pub variant: Variant,
    #[serde(rename = "question")]
    pub text: String,
    pub choices: [String; NUM_CHOICES],
    pub answer_index: ChoiceIndex,
}

impl Question {
    pub fn answer(&self) -> ChoiceIndex {
        self.answer_index
    }

    pub fn choice(&self, index: ChoiceIndex) -> &str {
        &self.choices[index.index()]
    }

    fn validate(&self) -> Result<(), DatasetError> {
        let fail = |reason: &str| DatasetError::Schema {
            id: self.id.clone(),
            reason: reason.to_string(),
        };
        if self.id.trim().is_empty() {
            return Err(fail("empty id"));
        }
        if self.group_id.trim().is_empty() {
            return Err(fail("empty group_id"));
        }
        if self.text.trim().is_empty() {
            return Err(fail("empty question text"));
        }
        if let Some(i) = self.choices.iter().position(|c| c.trim().is_empty()) {
            return Err(fail(&format!("choice {i} is empty")));
        }
        Ok(())
    }
}

/// All reconstructions of one underlying puzzle.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct QuestionGroup {
    pub group_id: String,
    pub members: BTreeMap<Variant, Question>,
}

impl QuestionGroup {
    pub fn get(&self, variant: Variant) -> Option<&Question> {
        self.members.get(&variant)
    }

    pub fn contains_all(&self, variants: &[Variant]) -> bool {
        variants.iter().all(|v| self.members.contains_key(v))
    }

    pub fn is_complete(&self) -> bool {
        self.contains_all(&Variant::ALL)
    }

    pub fn questions(&self) -> impl Iterator<Item = &Question> {
        self.members.values()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Dataset {
    pub name: String,
    pub questions: Vec<Question>,
}

impl Dataset {
    /// Builds a dataset from already-constructed questions, enforcing the
    /// record invariants and id uniqueness.
    pub fn new(name: impl Into<String>, questions: Vec<Question>) -> Result<Self, DatasetError> {
        let mut seen = HashSet::new();
        for q in &questions {
            q.validate()?;
            if !seen.insert(q.id.as_str()) {
                return Err(DatasetError::DuplicateId(q.id.clone()));
            }
        }
        Ok(Dataset {
            name: name.into(),
            questions,
        })
    }

    pub fn len(&self) -> usize {
        self.questions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.questions.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&Question> {
        self.questions.iter().find(|q| q.id == id)
    }

    /// Serializes to the documented JSON record format.
    pub fn to_json(&self) -> String {
        let records: Vec<Value> = self.questions.iter().map(record_value).collect();
        serde_json::to_string_pretty(&records).expect("dataset records serialize")
    }

    pub fn save(&self, path: &Path) -> Result<(), DatasetError> {
        fs::write(path, self.to_json() + "\n").map_err(|source| DatasetError::Io {
            path: path.to_path_buf(),
            source,
        })
    }
}

fn record_value(q: &Question) -> Value {
    serde_json::json!({
        "id": q.id,
        "group_id": q.group_id,
        "variant": q.variant,
        "question": q.text,
        "choices": q.choices,
        "answer_index": q.answer_index,
    })
}

const KNOWN_KEYS: [&str; 6] = ["id", "group_id", "variant", "question", "choices", "answer_index"];

/// Parses dataset JSON text. `name` labels the resulting dataset.
pub fn parse_dataset(name: &str, text: &str) -> Result<Dataset, DatasetError> {
    let root: Value =
        serde_json::from_str(text).map_err(|e| DatasetError::NotAnArray(e.to_string()))?;
    let Value::Array(records) = root else {
        return Err(DatasetError::NotAnArray("top-level value is not an array".into()));
    };

    let mut questions = Vec::with_capacity(records.len());
    for (pos, record) in records.into_iter().enumerate() {
        let id = record
            .get("id")
            .and_then(Value::as_str)
            .map(str::to_string)
            .unwrap_or_else(|| format!("#{pos}"));
        if let Value::Object(map) = &record {
            for key in map.keys().filter(|k| !KNOWN_KEYS.contains(&k.as_str())) {
                tracing::warn!(record = %id, key = %key, "ignoring unknown dataset key");
            }
        }
        let question: Question =
            serde_json::from_value(record).map_err(|e| DatasetError::Schema {
                id: id.clone(),
                reason: e.to_string(),
            })?;
        questions.push(question);
    }
    Dataset::new(name, questions)
}

pub fn load_dataset(path: &Path) -> Result<Dataset, DatasetError> {
    let text = fs::read_to_string(path).map_err(|source| DatasetError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    parse_dataset(&name, &text)
}

/// Partitions the dataset by `group_id`, in order of first appearance.
///
/// Groups lacking a semantic or context member are kept, with a warning.
pub fn group_by_reconstruction(dataset: &Dataset) -> Result<Vec<QuestionGroup>, DatasetError> {
    let mut order: Vec<String> = Vec::new();
    let mut groups: BTreeMap<String, QuestionGroup> = BTreeMap::new();
    for q in &dataset.questions {
        let group = groups.entry(q.group_id.clone()).or_insert_with(|| {
            order.push(q.group_id.clone());
            QuestionGroup {
                group_id: q.group_id.clone(),
                members: BTreeMap::new(),
            }
        });
        if group.members.insert(q.variant, q.clone()).is_some() {
            return Err(DatasetError::DuplicateVariant {
                group_id: q.group_id.clone(),
                variant: q.variant,
            });
        }
    }
    let out: Vec<QuestionGroup> = order
        .into_iter()
        .map(|id| groups.remove(&id).expect("group recorded in order"))
        .collect();
    for g in out.iter().filter(|g| !g.is_complete()) {
        let missing: Vec<&str> = Variant::ALL
            .iter()
            .filter(|v| !g.members.contains_key(v))
            .map(|v| v.as_str())
            .collect();
        tracing::warn!(group = %g.group_id, ?missing, "incomplete reconstruction group");
    }
    Ok(out)
}

/// Builds the four `[CLS] Q [SEP] Choice [SEP]` cross-encoder inputs, one per
/// choice, in choice order.
pub fn format_mc_sequences(question: &Question, cls_token: &str, sep_token: &str) -> [String; NUM_CHOICES] {
    std::array::from_fn(|i| {
        format!(
            "{cls_token} {} {sep_token} {} {sep_token}",
            question.text, question.choices[i]
        )
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(id: &str, group: &str, variant: Variant) -> Question {
        Question {
            id: id.into(),
            group_id: group.into(),
            variant,
            text: format!("question {id}"),
            choices: ["a".into(), "b".into(), "c".into(), "d".into()],
            answer_index: ChoiceIndex::new(1).unwrap(),
        }
    }

    #[test]
    fn letters_round_trip() {
        for c in ChoiceIndex::ALL {
            assert_eq!(ChoiceIndex::from_letter(c.letter()), Some(c));
        }
        assert_eq!(ChoiceIndex::from_letter('b'), ChoiceIndex::new(1));
        assert_eq!(ChoiceIndex::from_letter('E'), None);
        assert_eq!(ChoiceIndex::new(4), None);
    }

    #[test]
    fn parses_single_record() {
        let text = r#"[{"id":"q1","group_id":"g1","variant":"original","question":"Why?",
            "choices":["A1","A2","A3","A4"],"answer_index":3}]"#;
        let ds = parse_dataset("t", text).unwrap();
        assert_eq!(ds.len(), 1);
        assert_eq!(ds.questions[0].answer().letter(), 'D');
    }

    #[test]
    fn three_choices_names_record() {
        let text = r#"[{"id":"bad-7","group_id":"g","variant":"original","question":"Q",
            "choices":["a","b","c"],"answer_index":0}]"#;
        match parse_dataset("t", text) {
            Err(DatasetError::Schema { id, .. }) => assert_eq!(id, "bad-7"),
            other => panic!("expected schema error, got {other:?}"),
        }
    }

    #[test]
    fn rejects_bad_answer_index_and_empty_choice() {
        let text = r#"[{"id":"x","group_id":"g","variant":"original","question":"Q",
            "choices":["a","b","c","d"],"answer_index":4}]"#;
        assert!(matches!(parse_dataset("t", text), Err(DatasetError::Schema { .. })));
        let text = r#"[{"id":"y","group_id":"g","variant":"context","question":"Q",
            "choices":["a"," ","c","d"],"answer_index":0}]"#;
        assert!(matches!(parse_dataset("t", text), Err(DatasetError::Schema { id, .. }) if id == "y"));
    }

    #[test]
    fn duplicate_ids_rejected() {
        let err = Dataset::new("t", vec![q("a", "g", Variant::Original), q("a", "h", Variant::Original)]);
        assert!(matches!(err, Err(DatasetError::DuplicateId(id)) if id == "a"));
    }

    #[test]
    fn unknown_keys_are_ignored() {
        let text = r#"[{"id":"q1","group_id":"g1","variant":"semantic","question":"Q",
            "choices":["a","b","c","d"],"answer_index":0,"distractor1":"x"}]"#;
        assert_eq!(parse_dataset("t", text).unwrap().len(), 1);
    }

    #[test]
    fn groups_two_full_triples() {
        let mut qs = Vec::new();
        for g in ["g1", "g2"] {
            for v in Variant::ALL {
                qs.push(q(&format!("{g}-{v}"), g, v));
            }
        }
        let ds = Dataset::new("t", qs).unwrap();
        let groups = group_by_reconstruction(&ds).unwrap();
        assert_eq!(groups.len(), 2);
        assert!(groups.iter().all(|g| g.members.len() == 3 && g.is_complete()));
        assert_eq!(groups[0].group_id, "g1");
    }

    #[test]
    fn singleton_group_is_legal() {
        let ds = Dataset::new("t", vec![q("only", "g", Variant::Original)]).unwrap();
        let groups = group_by_reconstruction(&ds).unwrap();
        assert_eq!(groups.len(), 1);
        assert_eq!(groups[0].members.len(), 1);
    }

    #[test]
    fn duplicate_variant_in_group_rejected() {
        let ds = Dataset::new("t", vec![q("a", "g", Variant::Semantic), q("b", "g", Variant::Semantic)]).unwrap();
        assert!(matches!(
            group_by_reconstruction(&ds),
            Err(DatasetError::DuplicateVariant { variant: Variant::Semantic, .. })
        ));
    }

    #[test]
    fn formats_worked_example() {
        let mut question = q("x", "g", Variant::Original);
        question.text = "Why?".into();
        question.choices[0] = "A1".into();
        let seqs = format_mc_sequences(&question, "[CLS]", "[SEP]");
        assert_eq!(seqs[0], "[CLS] Why? [SEP] A1 [SEP]");
        assert_eq!(seqs[3], "[CLS] Why? [SEP] d [SEP]");
    }

    #[test]
    fn identical_choices_give_identical_sequences() {
        let mut question = q("x", "g", Variant::Original);
        question.choices = std::array::from_fn(|_| "same".to_string());
        let seqs = format_mc_sequences(&question, "<s>", "</s>");
        assert!(seqs.iter().all(|s| s == &seqs[0]));
    }
}
