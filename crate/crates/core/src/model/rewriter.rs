use std::path::Path;

use crate::edit_engine::{apply_program, EditProgram, EngineError, RewriteResult, TokenSequence, UseCase};

use super::checkpoint::Checkpoint;
use super::config::ModelConfig;
use super::decode::{argmax, decode, HeadOutputs};
use super::loss::ForwardOutput;
use super::network::{forward, run_batch, BatchState};
use super::params::Params;
use super::tensor::softmax_in_place;
use super::vocab::Vocab;
use super::ModelError;

/// Inputs per batched inference call.
const PREDICT_CHUNK: usize = 128;

/// Head outputs of one sequence inside a batch. Pointer rows are computed
/// only when asked for.
struct BatchView<'a> {
    st: &'a BatchState<f32>,
    params: &'a Params<f32>,
    config: &'a ModelConfig,
    slot: usize,
}

impl BatchView<'_> {
    fn logits(&self, i: usize) -> &[f32] {
        let row = self.st.enc.packed.row(self.slot, i);
        &self.st.logits[row * self.st.width..(row + 1) * self.st.width]
    }

    fn block(&self, u: usize) -> usize {
        u * (5 + self.config.proj_dim)
    }
}

impl HeadOutputs for BatchView<'_> {
    fn len(&self) -> usize {
        self.st.enc.packed.lens[self.slot]
    }

    fn rd(&self, u: usize, i: usize) -> [f64; 3] {
        let o = self.block(u);
        let mut r = [0f32; 3];
        r.copy_from_slice(&self.logits(i)[o..o + 3]);
        softmax_in_place(&mut r);
        r.map(f64::from)
    }

    fn del(&self, u: usize, i: usize) -> [f64; 2] {
        let o = self.block(u) + 3;
        let mut r = [0f32; 2];
        r.copy_from_slice(&self.logits(i)[o..o + 2]);
        softmax_in_place(&mut r);
        r.map(f64::from)
    }

    fn rr_argmax(&self, u: usize, i: usize) -> usize {
        let (_, _, s) = self.st.pointer_logits(self.params, self.config, self.slot, u, i);
        argmax(s.into_iter().map(f64::from))
    }
}

pub(crate) fn token_ids(vocab: &Vocab, seq: &TokenSequence) -> Vec<u32> {
    vocab.encode(&seq.texts())
}

/// Decoded programs for many inputs, one encoder and one head pass per
/// chunk of inputs.
pub(crate) fn predict_programs(
    params: &Params<f32>,
    config: &ModelConfig,
    vocab: &Vocab,
    seqs: &[TokenSequence],
) -> Result<Vec<EditProgram>, ModelError> {
    let mut out = vec![EditProgram::empty(); seqs.len()];
    for (c, chunk) in seqs.chunks(PREDICT_CHUNK).enumerate() {
        let ids: Vec<Vec<u32>> = chunk.iter().map(|s| token_ids(vocab, s)).collect();
        let refs: Vec<&[u32]> = ids.iter().map(Vec::as_slice).collect();
        let st = run_batch::<f32, rand_chacha::ChaCha8Rng>(params, config, &refs, None)?;
        for (slot, &orig) in st.order.iter().enumerate() {
            let view = BatchView {
                st: &st,
                params,
                config,
                slot,
            };
            out[c * PREDICT_CHUNK + orig] = decode(&view, &chunk[orig]);
        }
    }
    Ok(out)
}

/// Applies a program, dropping use cases caught in a dependency cycle
/// (the last one named by the engine each time) until it goes through.
pub fn apply_fail_soft(seq: &TokenSequence, program: &EditProgram) -> Result<(RewriteResult, Vec<UseCase>), EngineError> {
    let mut program = program.clone();
    let mut broken = Vec::new();
    loop {
        match apply_program(seq, &program) {
            Ok(r) => return Ok((r, broken)),
            Err(EngineError::CyclicDependency(ucs)) if !ucs.is_empty() => {
                let uc = *ucs.iter().max().expect("non-empty");
                program.clear(uc);
                broken.push(uc);
            }
            Err(e) => return Err(e),
        }
    }
}

/// A model prediction with its rewrite.
#[derive(Clone, Debug)]
pub struct Prediction {
    pub program: EditProgram,
    pub outcome: Result<RewriteResult, EngineError>,
    /// Use cases removed to break a dependency cycle.
    pub cycle_dropped: Vec<UseCase>,
}

impl Prediction {
    /// Applies `program` to `seq`, breaking dependency cycles if needed.
    pub fn from_program(seq: &TokenSequence, program: EditProgram) -> Self {
        match apply_fail_soft(seq, &program) {
            Ok((r, cycle_dropped)) => Prediction {
                program,
                outcome: Ok(r),
                cycle_dropped,
            },
            Err(e) => Prediction {
                program,
                outcome: Err(e),
                cycle_dropped: Vec::new(),
            },
        }
    }

    /// The rewrite string, or `None` if the engine produced none.
    pub fn text(&self) -> Option<String> {
        self.outcome.as_ref().ok().map(RewriteResult::text)
    }
}

/// Loaded model used for inference.
#[derive(Clone, Debug)]
pub struct Rewriter {
    pub checkpoint: Checkpoint,
}

impl Rewriter {
    pub fn new(checkpoint: Checkpoint) -> Self {
        Rewriter { checkpoint }
    }

    pub fn load(path: &Path) -> Result<Self, ModelError> {
        Ok(Rewriter::new(Checkpoint::load(path)?))
    }

    pub fn token_ids(&self, seq: &TokenSequence) -> Vec<u32> {
        token_ids(&self.checkpoint.vocab, seq)
    }

    /// Full head distributions for one input.
    pub fn forward(&self, seq: &TokenSequence) -> Result<ForwardOutput, ModelError> {
        let c = &self.checkpoint;
        forward(&c.params, &c.config, &self.token_ids(seq))
    }

    /// Decoded program for one input: one encoder pass, one head pass.
    pub fn predict_program(&self, seq: &TokenSequence) -> Result<EditProgram, ModelError> {
        let c = &self.checkpoint;
        Ok(predict_programs(&c.params, &c.config, &c.vocab, std::slice::from_ref(seq))?.remove(0))
    }

    pub fn predict_programs(&self, seqs: &[TokenSequence]) -> Result<Vec<EditProgram>, ModelError> {
        let c = &self.checkpoint;
        predict_programs(&c.params, &c.config, &c.vocab, seqs)
    }

    pub fn predict(&self, seq: &TokenSequence) -> Result<Prediction, ModelError> {
        Ok(Prediction::from_program(seq, self.predict_program(seq)?))
    }

    pub fn predict_batch(&self, seqs: &[TokenSequence]) -> Result<Vec<Prediction>, ModelError> {
        Ok(self
            .predict_programs(seqs)?
            .into_iter()
            .zip(seqs)
            .map(|(p, s)| Prediction::from_program(s, p))
            .collect())
    }

    /// Rewrites a (context, follow-up) pair given as text.
    pub fn rewrite(&self, context: &str, followup: &str) -> Result<Prediction, ModelError> {
        let seq = TokenSequence::from_text(context, followup)?;
        self.predict(&seq)
    }
}
