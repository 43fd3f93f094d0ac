use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::datagen::LabeledExample;
use crate::edit_engine::UseCase;
use crate::model::Prediction;

use super::{exact_match, EvalError, Predictor};

/// Why a prediction missed, checked in this order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureCategory {
    /// The engine produced no rewrite.
    ExtractionError,
    /// A use case the gold program edits was left without edits, or the
    /// engine had to drop one.
    DroppedEdit,
    WrongSubstitution,
    WrongDeletion,
}

impl FailureCategory {
    pub const ALL: [FailureCategory; 4] = [
        FailureCategory::ExtractionError,
        FailureCategory::DroppedEdit,
        FailureCategory::WrongSubstitution,
        FailureCategory::WrongDeletion,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            FailureCategory::ExtractionError => "extraction_error",
            FailureCategory::DroppedEdit => "dropped_edit",
            FailureCategory::WrongSubstitution => "wrong_substitution",
            FailureCategory::WrongDeletion => "wrong_deletion",
        }
    }

    fn classify(pred: &Prediction, gold: &LabeledExample) -> Self {
        let Ok(result) = &pred.outcome else {
            return FailureCategory::ExtractionError;
        };
        let missing = gold
            .use_cases
            .iter()
            .any(|&uc| !gold.program.get(uc).is_empty() && pred.program.get(uc).is_empty());
        if missing || !result.dropped.is_empty() || !pred.cycle_dropped.is_empty() {
            return FailureCategory::DroppedEdit;
        }
        let subs_equal = UseCase::ALL
            .iter()
            .all(|&uc| pred.program.get(uc).substitution == gold.program.get(uc).substitution);
        if subs_equal {
            FailureCategory::WrongDeletion
        } else {
            FailureCategory::WrongSubstitution
        }
    }
}

/// Name of the task an example belongs to: its use case, or the use
/// cases joined with `+` for compositional data.
pub fn task_label(use_cases: &[UseCase]) -> String {
    let mut ucs = use_cases.to_vec();
    ucs.sort();
    ucs.iter().map(|u| u.as_str()).collect::<Vec<_>>().join("+")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskRow {
    pub task: String,
    pub count: usize,
    pub correct: usize,
    pub exact_match: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalReport {
    /// Single tasks in canonical order, then compositions.
    pub tasks: Vec<TaskRow>,
    /// Unweighted mean of the task percentages.
    pub macro_average: f64,
    /// Percentage over all examples.
    pub micro_average: f64,
    pub total: usize,
    pub failures: BTreeMap<FailureCategory, usize>,
}

impl EvalReport {
    pub fn task(&self, name: &str) -> Option<&TaskRow> {
        self.tasks.iter().find(|t| t.task == name)
    }

    /// One JSON record per task followed by a summary record.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for t in &self.tasks {
            out.push_str(&serde_json::to_string(t).expect("plain data"));
            out.push('\n');
        }
        out.push_str(&serde_json::to_string(self).expect("plain data"));
        out.push('\n');
        out
    }
}

fn percent(correct: usize, count: usize) -> f64 {
    if count == 0 {
        0.0
    } else {
        100.0 * correct as f64 / count as f64
    }
}

/// Exact match per task, macro average and failure counts.
pub fn evaluate<P: Predictor + ?Sized>(predictor: &P, dataset: &[LabeledExample]) -> Result<EvalReport, EvalError> {
    if dataset.is_empty() {
        return Err(EvalError::EmptyDataset);
    }
    let preds = predictor.predict(dataset)?;
    let mut groups: BTreeMap<(usize, Vec<UseCase>), (usize, usize)> = BTreeMap::new();
    let mut failures: BTreeMap<FailureCategory, usize> = FailureCategory::ALL.iter().map(|&c| (c, 0)).collect();
    for (pred, gold) in preds.iter().zip(dataset) {
        let mut ucs = gold.use_cases.clone();
        ucs.sort();
        let g = groups.entry((ucs.len(), ucs)).or_default();
        g.0 += 1;
        let hit = pred.outcome.as_ref().is_ok_and(|r| exact_match(&r.tokens, &gold.rewrite));
        if hit {
            g.1 += 1;
        } else {
            *failures.entry(FailureCategory::classify(pred, gold)).or_default() += 1;
        }
    }
    let tasks: Vec<TaskRow> = groups
        .into_iter()
        .map(|((_, ucs), (count, correct))| TaskRow {
            task: task_label(&ucs),
            count,
            correct,
            exact_match: percent(correct, count),
        })
        .collect();
    let macro_average = tasks.iter().map(|t| t.exact_match).sum::<f64>() / tasks.len() as f64;
    let correct: usize = tasks.iter().map(|t| t.correct).sum();
    Ok(EvalReport {
        macro_average,
        micro_average: percent(correct, dataset.len()),
        total: dataset.len(),
        tasks,
        failures,
    })
}

impl fmt::Display for EvalReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let width = self.tasks.iter().map(|t| t.task.len()).max().unwrap_or(0).max(7);
        writeln!(f, "{:<width$}  {:>7}  {:>7}  {:>8}", "task", "count", "correct", "exact %")?;
        for t in &self.tasks {
            writeln!(f, "{:<width$}  {:>7}  {:>7}  {:>8.2}", t.task, t.count, t.correct, t.exact_match)?;
        }
        writeln!(f, "{:<width$}  {:>7}  {:>7}  {:>8.2}", "average", self.total, "", self.macro_average)?;
        write!(f, "failures:")?;
        for (c, n) in &self.failures {
            write!(f, " {}={n}", c.as_str())?;
        }
        writeln!(f)
    }
}
