//! Instance-based and group-based accuracy.
//!
//! Instance accuracy is the fraction of questions of one variant answered
//! correctly. Group accuracy is the fraction of reconstruction groups in
//! which every required variant is answered correctly. Every rate is kept as
//! an integer numerator/denominator pair.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{ChoiceIndex, QuestionGroup, Variant};
use crate::scalar::{Rational, Weight};

pub const ORI_SEM: [Variant; 2] = [Variant::Original, Variant::Semantic];
pub const ORI_SEM_CON: [Variant; 3] = Variant::ALL;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MetricsError {
    #[error("no prediction for question `{0}`")]
    MissingPrediction(String),
    #[error("question `{0}` predicted more than once")]
    DuplicatePrediction(String),
    #[error("group `{group_id}` has no {variant} question")]
    IncompleteGroup { group_id: String, variant: Variant },
    #[error("predictions line {line}: {message}")]
    Csv { line: usize, message: String },
    #[error("cannot access predictions {path}: {message}")]
    Io { path: String, message: String },
}

/// `correct` out of `total`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "CellRepr", into = "CellRepr")]
pub struct Cell {
    pub correct: u64,
    pub total: u64,
}

#[derive(Serialize, Deserialize)]
struct CellRepr {
    correct: u64,
    total: u64,
    #[serde(default)]
    rate: f64,
}

impl From<CellRepr> for Cell {
    fn from(r: CellRepr) -> Self {
        Cell {
            correct: r.correct,
            total: r.total,
        }
    }
}

impl From<Cell> for CellRepr {
    fn from(c: Cell) -> Self {
        CellRepr {
            correct: c.correct,
            total: c.total,
            rate: c.rate(),
        }
    }
}

impl Cell {
    pub fn new(correct: u64, total: u64) -> Self {
        debug_assert!(correct <= total);
        Cell { correct, total }
    }

    fn record(&mut self, hit: bool) {
        self.total += 1;
        self.correct += u64::from(hit);
    }

    pub fn is_empty(&self) -> bool {
        self.total == 0
    }

    /// The rate in any scalar; zero for an empty cell.
    pub fn rate_as<W: Weight>(&self) -> W {
        if self.total == 0 {
            return W::zero();
        }
        let n = W::from_u64(self.correct).unwrap_or_else(W::zero);
        let d = W::from_u64(self.total).unwrap_or_else(W::one);
        n / d
    }

    pub fn rate(&self) -> f64 {
        self.rate_as()
    }

    pub fn exact(&self) -> Rational {
        if self.total == 0 {
            return Rational::from_integer(0);
        }
        Rational::new(self.correct as i64, self.total as i64)
    }
}

impl std::ops::Add for Cell {
    type Output = Cell;

    fn add(self, rhs: Cell) -> Cell {
        Cell::new(self.correct + rhs.correct, self.total + rhs.total)
    }
}

/// Predicted choice per question id. An abstention (`None`) is always
/// scored as wrong; it is written as `-1` in CSV.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct PredictionSet {
    predictions: BTreeMap<String, Option<ChoiceIndex>>,
}

impl PredictionSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, id: impl Into<String>, choice: ChoiceIndex) -> Result<(), MetricsError> {
        self.insert_prediction(id, Some(choice))
    }

    pub fn insert_prediction(&mut self, id: impl Into<String>, choice: Option<ChoiceIndex>) -> Result<(), MetricsError> {
        let id = id.into();
        if self.predictions.contains_key(&id) {
            return Err(MetricsError::DuplicatePrediction(id));
        }
        self.predictions.insert(id, choice);
        Ok(())
    }

    /// `None` if there is no entry; `Some(None)` for an abstention.
    pub fn get(&self, id: &str) -> Option<Option<ChoiceIndex>> {
        self.predictions.get(id).copied()
    }

    pub fn len(&self) -> usize {
        self.predictions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.predictions.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, Option<ChoiceIndex>)> {
        self.predictions.iter().map(|(k, &v)| (k.as_str(), v))
    }

    /// `id,predicted_index` with a header line, ordered by `order` when given
    /// (ids not in `order` follow in sorted order).
    pub fn to_csv(&self, order: &[&str]) -> String {
        let mut out = String::from("id,predicted_index\n");
        let mut written = std::collections::HashSet::new();
        for id in order {
            if let Some(c) = self.get(id) {
                let _ = writeln!(out, "{},{}", csv_field(id), csv_index(c));
                written.insert(*id);
            }
        }
        for (id, c) in self.iter().filter(|(id, _)| !written.contains(id)) {
            let _ = writeln!(out, "{},{}", csv_field(id), csv_index(c));
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self, MetricsError> {
        let mut set = PredictionSet::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || (n == 0 && line.eq_ignore_ascii_case("id,predicted_index")) {
                continue;
            }
            let err = |message: String| MetricsError::Csv { line: n + 1, message };
            let (id, index) = line.rsplit_once(',').ok_or_else(|| err("expected `id,predicted_index`".into()))?;
            let index: i64 = index.trim().parse().map_err(|e| err(format!("bad index `{index}`: {e}")))?;
            let choice = match index {
                -1 => None,
                i => Some(
                    usize::try_from(i)
                        .ok()
                        .and_then(ChoiceIndex::new)
                        .ok_or_else(|| err(format!("index {i} out of range 0..4")))?,
                ),
            };
            set.insert_prediction(unquote(id.trim()), choice)?;
        }
        Ok(set)
    }

    pub fn load(path: &Path) -> Result<Self, MetricsError> {
        let text = std::fs::read_to_string(path).map_err(|e| MetricsError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Self::from_csv(&text)
    }
}

impl FromIterator<(String, ChoiceIndex)> for PredictionSet {
    /// Later duplicates overwrite earlier ones.
    fn from_iter<T: IntoIterator<Item = (String, ChoiceIndex)>>(iter: T) -> Self {
        PredictionSet {
            predictions: iter.into_iter().map(|(k, v)| (k, Some(v))).collect(),
        }
    }
}

fn csv_index(choice: Option<ChoiceIndex>) -> String {
    choice.map_or_else(|| "-1".to_string(), |c| c.index().to_string())
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn unquote(s: &str) -> String {
    match s.strip_prefix('"').and_then(|s| s.strip_suffix('"')) {
        Some(inner) => inner.replace("\"\"", "\""),
        None => s.to_string(),
    }
}

fn is_correct(preds: &PredictionSet, id: &str, answer: ChoiceIndex) -> Result<bool, MetricsError> {
    preds
        .get(id)
        .map(|p| p == Some(answer))
        .ok_or_else(|| MetricsError::MissingPrediction(id.to_string()))
}

pub fn instance_accuracy(groups: &[QuestionGroup], preds: &PredictionSet, variant: Variant) -> Result<Cell, MetricsError> {
    let mut cell = Cell::default();
    for q in groups.iter().filter_map(|g| g.get(variant)) {
        cell.record(is_correct(preds, &q.id, q.answer())?);
    }
    Ok(cell)
}

/// Fraction of groups where every variant in `required` is correct. Every
/// group must contain all of `required`.
pub fn group_accuracy(groups: &[QuestionGroup], preds: &PredictionSet, required: &[Variant]) -> Result<Cell, MetricsError> {
    let mut cell = Cell::default();
    for g in groups {
        let mut all = true;
        for &variant in required {
            let q = g.get(variant).ok_or_else(|| MetricsError::IncompleteGroup {
                group_id: g.group_id.clone(),
                variant,
            })?;
            all &= is_correct(preds, &q.id, q.answer())?;
        }
        cell.record(all);
    }
    Ok(cell)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub instance_ori: Cell,
    pub instance_sem: Cell,
    pub instance_con: Cell,
    pub group_ori_sem: Cell,
    pub group_ori_sem_con: Cell,
    pub overall: Cell,
}

impl MetricsReport {
    /// Cells in table column order.
    pub fn cells(&self) -> [(&'static str, Cell); 6] {
        [
            ("ori", self.instance_ori),
            ("sem", self.instance_sem),
            ("con", self.instance_con),
            ("ori_sem", self.group_ori_sem),
            ("ori_sem_con", self.group_ori_sem_con),
            ("overall", self.overall),
        ]
    }
}

/// Fills every cell. Groups missing a required variant are left out of that
/// group metric (with a warning) but still count toward instance metrics.
pub fn build_report(groups: &[QuestionGroup], preds: &PredictionSet) -> Result<MetricsReport, MetricsError> {
    let instance_ori = instance_accuracy(groups, preds, Variant::Original)?;
    let instance_sem = instance_accuracy(groups, preds, Variant::Semantic)?;
    let instance_con = instance_accuracy(groups, preds, Variant::Context)?;

    let with = |required: &[Variant]| -> Vec<QuestionGroup> {
        let kept: Vec<QuestionGroup> = groups.iter().filter(|g| g.contains_all(required)).cloned().collect();
        if kept.len() != groups.len() {
            tracing::warn!(
                excluded = groups.len() - kept.len(),
                ?required,
                "incomplete groups excluded from group accuracy"
            );
        }
        kept
    };
    let group_ori_sem = group_accuracy(&with(&ORI_SEM), preds, &ORI_SEM)?;
    let group_ori_sem_con = group_accuracy(&with(&ORI_SEM_CON), preds, &ORI_SEM_CON)?;

    let known: usize = groups.iter().map(|g| g.members.len()).sum();
    if preds.len() > known {
        tracing::warn!(extra = preds.len() - known, "predictions for unknown question ids ignored");
    }

    Ok(MetricsReport {
        instance_ori,
        instance_sem,
        instance_con,
        group_ori_sem,
        group_ori_sem_con,
        overall: instance_ori + instance_sem + instance_con,
    })
}

/// Aligned plain-text table, one row per `(label, report)`.
pub fn render_table(rows: &[(String, MetricsReport)]) -> String {
    let label_width = rows.iter().map(|(l, _)| l.chars().count()).max().unwrap_or(0).max(5);
    let headers = MetricsReport::default().cells().map(|(h, _)| h);
    let widths: Vec<usize> = headers.iter().map(|h| h.len().max(5)).collect();

    let mut out = String::new();
    let _ = write!(out, "{:<label_width$}", "model");
    for (h, w) in headers.iter().zip(&widths) {
        let _ = write!(out, "  {h:>w$}");
    }
    out.push('\n');
    for (label, report) in rows {
        let _ = write!(out, "{label:<label_width$}");
        for ((_, cell), w) in report.cells().iter().zip(&widths) {
            let v = if cell.is_empty() { "n/a".to_string() } else { format!("{:.3}", cell.rate()) };
            let _ = write!(out, "  {v:>w$}");
        }
        out.push('\n');
    }
    out
}
