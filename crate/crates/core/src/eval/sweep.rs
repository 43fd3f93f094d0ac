use std::fmt;

use serde::{Deserialize, Serialize};

use crate::datagen::{LabeledExample, Split};

use super::{evaluate, EvalError, Predictor};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepPoint {
    /// Compositional examples mixed into training.
    pub size: usize,
    /// Exact match on the compositional test set, percent.
    pub exact_match: f64,
    pub train_examples: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepCurve {
    pub points: Vec<SweepPoint>,
    pub test_examples: usize,
}

impl SweepCurve {
    /// Two tab-separated columns, `size` and `accuracy`, with a header.
    pub fn to_tsv(&self) -> String {
        let mut s = String::from("size\taccuracy\n");
        for p in &self.points {
            s.push_str(&format!("{}\t{:.4}\n", p.size, p.exact_match));
        }
        s
    }

    pub fn to_jsonl(&self) -> String {
        self.points
            .iter()
            .map(|p| serde_json::to_string(p).expect("plain data") + "\n")
            .collect()
    }

    pub fn at(&self, size: usize) -> Option<f64> {
        self.points.iter().find(|p| p.size == size).map(|p| p.exact_match)
    }
}

impl fmt::Display for SweepCurve {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:>6}  {:>8}  {:>7}", "size", "exact %", "trained")?;
        for p in &self.points {
            writeln!(f, "{:>6}  {:>8.2}  {:>7}", p.size, p.exact_match, p.train_examples)?;
        }
        Ok(())
    }
}

/// Trains one model per size on the single-task training split plus the
/// first `size` compositional training examples, and scores each on the
/// compositional test split.
///
/// Validation uses the single-task validation split plus the first
/// `size / 8` compositional validation examples, so the size-0 run sees
/// no compositional data at all.
pub fn composition_sweep<M, F>(
    mut factory: F,
    single_task: &[LabeledExample],
    compositional: &[LabeledExample],
    sizes: &[usize],
    mut on_point: impl FnMut(&SweepPoint),
) -> Result<SweepCurve, EvalError>
where
    M: Predictor,
    F: FnMut(&[LabeledExample], &[LabeledExample]) -> Result<M, EvalError>,
{
    let of = |data: &[LabeledExample], split: Split| -> Vec<LabeledExample> {
        data.iter().filter(|e| e.split == split).cloned().collect()
    };
    let (st_train, st_valid) = (of(single_task, Split::Train), of(single_task, Split::Valid));
    let (c_train, c_valid, c_test) = (
        of(compositional, Split::Train),
        of(compositional, Split::Valid),
        of(compositional, Split::Test),
    );
    if c_test.is_empty() {
        return Err(EvalError::EmptyDataset);
    }
    if let Some(&size) = sizes.iter().find(|&&s| s > c_train.len()) {
        return Err(EvalError::SweepSize {
            size,
            available: c_train.len(),
        });
    }
    let mut points = Vec::with_capacity(sizes.len());
    for &size in sizes {
        let mut train = st_train.clone();
        train.extend_from_slice(&c_train[..size]);
        let mut valid = st_valid.clone();
        valid.extend_from_slice(&c_valid[..(size / 8).min(c_valid.len())]);
        let model = factory(&train, &valid)?;
        let report = evaluate(&model, &c_test)?;
        let point = SweepPoint {
            size,
            exact_match: report.micro_average,
            train_examples: train.len(),
        };
        on_point(&point);
        points.push(point);
    }
    Ok(SweepCurve {
        points,
        test_examples: c_test.len(),
    })
}
