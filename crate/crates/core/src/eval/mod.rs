//! Scoring: exact match, per-task reports with failure categories, oracle
//! verification of datasets, composition sweeps and latency benchmarks.

mod latency;
mod oracle;
mod report;
mod sweep;

use thiserror::Error;

use crate::datagen::LabeledExample;
use crate::edit_engine::{join_tokens, EditProgram, EngineError};
use crate::model::{ModelError, Prediction, Rewriter};

pub use latency::{latency_bench, LatencyReport, LengthBucket, MIN_REPS};
pub use oracle::{oracle_verify, OracleMismatch, OracleReport};
pub use report::{evaluate, task_label, EvalReport, FailureCategory, TaskRow};
pub use sweep::{composition_sweep, SweepCurve, SweepPoint};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("need at least {need} repetitions, got {got}")]
    InsufficientSamples { need: usize, got: usize },
    #[error("sweep size {size} exceeds the {available} compositional training examples")]
    SweepSize { size: usize, available: usize },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Engine(#[from] EngineError),
}

/// Strict string equality of the single-space joins. Case-sensitive.
pub fn exact_match<A: AsRef<str>, B: AsRef<str>>(pred: &[A], gold: &[B]) -> bool {
    join_tokens(pred) == join_tokens(gold)
}

/// Anything that maps labeled inputs to rewrites.
pub trait Predictor {
    fn predict(&self, examples: &[LabeledExample]) -> Result<Vec<Prediction>, EvalError>;
}

/// Applies the gold program of each example.
#[derive(Clone, Copy, Debug, Default)]
pub struct OraclePredictor;

/// Predicts the empty program, i.e. echoes the follow-up.
#[derive(Clone, Copy, Debug, Default)]
pub struct EmptyPredictor;

fn with_programs(
    examples: &[LabeledExample],
    program: impl Fn(&LabeledExample) -> EditProgram,
) -> Result<Vec<Prediction>, EvalError> {
    examples
        .iter()
        .map(|e| Ok(Prediction::from_program(&e.sequence()?, program(e))))
        .collect()
}

impl Predictor for OraclePredictor {
    fn predict(&self, examples: &[LabeledExample]) -> Result<Vec<Prediction>, EvalError> {
        with_programs(examples, |e| e.program.clone())
    }
}

impl Predictor for EmptyPredictor {
    fn predict(&self, examples: &[LabeledExample]) -> Result<Vec<Prediction>, EvalError> {
        with_programs(examples, |_| EditProgram::empty())
    }
}

impl Predictor for Rewriter {
    fn predict(&self, examples: &[LabeledExample]) -> Result<Vec<Prediction>, EvalError> {
        let seqs = examples.iter().map(|e| e.sequence()).collect::<Result<Vec<_>, _>>()?;
        Ok(self.predict_batch(&seqs)?)
    }
}
