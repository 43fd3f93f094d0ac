use std::path::PathBuf;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::datagen::LabeledExample;
use crate::edit_engine::{join_tokens, TokenSequence};

use super::checkpoint::{write_atomic, Checkpoint, StateFile};
use super::config::{EmbeddingMode, ModelConfig};
use super::loss::LabelTensors;
use super::network::{batch_loss_and_grad, Sample};
use super::params::Params;
use super::rewriter::{apply_fail_soft, predict_programs, token_ids};
use super::tensor::Mat;
use super::vocab::Vocab;
use super::ModelError;

/// One line of the training log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EpochLog {
    pub epoch: usize,
    pub l_rd: f64,
    pub l_rr: f64,
    pub l_del: f64,
    pub l: f64,
    /// Percentage of validation examples rewritten exactly.
    pub valid_exact_match: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    MaxEpochs,
    Patience,
    PerfectValidation,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    /// Parameters of the best validation epoch.
    pub checkpoint: Checkpoint,
    pub log: Vec<EpochLog>,
    pub best_epoch: usize,
    pub best_valid_exact_match: f64,
    pub stop: StopReason,
    /// Loss of the untrained model on the first training batch.
    pub initial_loss: f64,
}

#[derive(Clone, Debug, Default)]
pub struct TrainOptions {
    /// Table for the frozen embedding mode, vocabulary-aligned.
    pub frozen_embeddings: Option<Mat<f32>>,
    /// Vocabulary to use instead of one built from the training split.
    pub vocab: Option<Vocab>,
    /// Training state written after every epoch; resumed from if present.
    /// A resumed run may raise `max_epochs` or change `patience`; every
    /// other setting must match.
    pub state_path: Option<PathBuf>,
    /// Stop as soon as validation exact match reaches 100%.
    pub stop_at_perfect: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Progress {
    epochs_done: usize,
    step: u64,
    best_epoch: usize,
    best_valid_exact_match: f64,
    bad_epochs: usize,
    initial_loss: f64,
    log: Vec<EpochLog>,
}

const STATE_GROUPS: [&str; 4] = ["params", "best", "adam_m", "adam_v"];

struct Adam {
    m: Params<f32>,
    v: Params<f32>,
    step: u64,
}

impl Adam {
    fn update(&mut self, p: &mut Params<f32>, g: &Params<f32>, cfg: &ModelConfig, skip_embedding: bool) {
        self.step += 1;
        let t = self.step as i32;
        let (b1, b2) = (cfg.beta1, cfg.beta2);
        let c1 = 1.0 - b1.powi(t);
        let c2 = 1.0 - b2.powi(t);
        let lr = (cfg.learning_rate * c2.sqrt() / c1) as f32;
        let eps = (cfg.epsilon * c2.sqrt()) as f32;
        let (b1, b2) = (b1 as f32, b2 as f32);
        let groups = p
            .tensors_mut()
            .into_iter()
            .zip(g.tensors())
            .zip(self.m.tensors_mut().into_iter().zip(self.v.tensors_mut()));
        for (((name, pt), (_, gt)), ((_, mt), (_, vt))) in groups {
            if skip_embedding && name == "embedding" {
                continue;
            }
            for (((w, &gr), m), v) in pt.data.iter_mut().zip(&gt.data).zip(&mut mt.data).zip(&mut vt.data) {
                *m = b1 * *m + (1.0 - b1) * gr;
                *v = b2 * *v + (1.0 - b2) * gr * gr;
                *w -= lr * *m / (v.sqrt() + eps);
            }
        }
    }
}

fn global_norm(g: &Params<f32>) -> f64 {
    g.tensors()
        .iter()
        .flat_map(|(_, t)| t.data.iter())
        .map(|&x| f64::from(x) * f64::from(x))
        .sum::<f64>()
        .sqrt()
}

fn scale(g: &mut Params<f32>, s: f32) {
    for (_, t) in g.tensors_mut() {
        t.data.iter_mut().for_each(|x| *x *= s);
    }
}

/// Vocabulary over the training inputs (context, separator, follow-up).
pub fn build_vocab(examples: &[LabeledExample]) -> Result<Vocab, ModelError> {
    let seqs: Vec<Vec<String>> = examples
        .iter()
        .map(|e| Ok(e.sequence()?.texts().into_iter().map(str::to_owned).collect()))
        .collect::<Result<_, ModelError>>()?;
    Ok(Vocab::build(seqs.iter().map(Vec::as_slice), 1))
}

/// Token ids and supervision targets of a labeled example.
pub fn make_sample(vocab: &Vocab, example: &LabeledExample) -> Result<Sample, ModelError> {
    let seq = example.sequence()?;
    Ok(Sample {
        ids: token_ids(vocab, &seq),
        labels: LabelTensors::from_program(&example.program, seq.len())?,
    })
}

/// Exact-match percentage of a parameter set on labeled examples.
pub fn exact_match_percent(
    params: &Params<f32>,
    config: &ModelConfig,
    vocab: &Vocab,
    examples: &[LabeledExample],
) -> Result<f64, ModelError> {
    if examples.is_empty() {
        return Ok(0.0);
    }
    let seqs: Vec<TokenSequence> = examples.iter().map(|e| e.sequence()).collect::<Result<_, _>>()?;
    let programs = predict_programs(params, config, vocab, &seqs)?;
    let hits = programs
        .iter()
        .zip(&seqs)
        .zip(examples)
        .filter(|((p, s), e)| {
            apply_fail_soft(s, p).is_ok_and(|(r, _)| join_tokens(&r.tokens) == join_tokens(&e.rewrite))
        })
        .count();
    Ok(100.0 * hits as f64 / examples.len() as f64)
}

fn epoch_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

/// Trains with Adam on `train`, selecting the epoch with the best
/// validation exact match. `on_epoch` sees every log line as it is made.
pub fn train(
    train: &[LabeledExample],
    valid: &[LabeledExample],
    config: &ModelConfig,
    options: &TrainOptions,
    mut on_epoch: impl FnMut(&EpochLog),
) -> Result<TrainOutcome, ModelError> {
    config.validate()?;
    if train.is_empty() {
        return Err(ModelError::EmptyBatch);
    }
    let vocab = match &options.vocab {
        Some(v) => v.clone(),
        None => build_vocab(train)?,
    };
    let samples: Vec<Sample> = train.iter().map(|e| make_sample(&vocab, e)).collect::<Result<_, _>>()?;
    if let Some(s) = samples.iter().find(|s| s.ids.len() > config.max_len) {
        return Err(ModelError::Length {
            len: s.ids.len(),
            max: config.max_len,
        });
    }
    let frozen = config.embedding == EmbeddingMode::Frozen;
    if frozen != options.frozen_embeddings.is_some() {
        return Err(ModelError::Config("frozen mode needs an embedding table, and only then".into()));
    }

    let mut params: Params<f32> = Params::init(config, vocab.len(), &mut ChaCha8Rng::seed_from_u64(config.seed));
    if let Some(table) = &options.frozen_embeddings {
        if table.shape() != params.embedding.shape() {
            return Err(ModelError::Config(format!(
                "embedding table is {:?}, expected {:?}",
                table.shape(),
                params.embedding.shape()
            )));
        }
        params.embedding = table.clone();
    }
    let mut adam = Adam {
        m: params.zeros_like(),
        v: params.zeros_like(),
        step: 0,
    };
    let mut best = params.clone();
    let mut progress = Progress {
        epochs_done: 0,
        step: 0,
        best_epoch: 0,
        best_valid_exact_match: -1.0,
        bad_epochs: 0,
        initial_loss: f64::NAN,
        log: Vec::new(),
    };

    if let Some(path) = options.state_path.as_ref().filter(|p| p.exists()) {
        let st = StateFile::from_bytes(&std::fs::read(path)?, &STATE_GROUPS)?;
        let mut saved = st.config.clone();
        saved.max_epochs = config.max_epochs;
        saved.patience = config.patience;
        if &saved != config || st.vocab != vocab {
            return Err(ModelError::Checkpoint("training state was made with a different config or data".into()));
        }
        progress = serde_json::from_value(st.state).map_err(|e| ModelError::Checkpoint(e.to_string()))?;
        let mut g = st.groups.into_iter().map(|(_, p)| p);
        params = g.next().expect("four groups");
        best = g.next().expect("four groups");
        adam.m = g.next().expect("four groups");
        adam.v = g.next().expect("four groups");
        adam.step = progress.step;
        for l in &progress.log {
            on_epoch(l);
        }
    }

    if progress.initial_loss.is_nan() {
        let first: Vec<&Sample> = samples.iter().take(config.batch_size).collect();
        progress.initial_loss = batch_loss_and_grad::<f32, ChaCha8Rng>(&params, config, &first, None, false)?.0.total;
    }

    let mut stop = StopReason::MaxEpochs;
    let finished = |p: &Progress| {
        if p.bad_epochs >= config.patience && !p.log.is_empty() {
            Some(StopReason::Patience)
        } else if options.stop_at_perfect && p.best_valid_exact_match >= 100.0 {
            Some(StopReason::PerfectValidation)
        } else {
            None
        }
    };
    let mut order: Vec<usize> = (0..samples.len()).collect();
    while progress.epochs_done < config.max_epochs {
        if let Some(r) = finished(&progress) {
            stop = r;
            break;
        }
        let epoch = progress.epochs_done + 1;
        order.sort_unstable();
        order.shuffle(&mut epoch_rng(config.seed, epoch as u64));
        let (mut s_rd, mut s_rr, mut s_del) = (0.0, 0.0, 0.0);
        for (bi, chunk) in order.chunks(config.batch_size).enumerate() {
            let mut rng = epoch_rng(config.seed ^ 0x9e37_79b9_7f4a_7c15, ((epoch as u64) << 32) | bi as u64);
            let batch: Vec<&Sample> = chunk.iter().map(|&i| &samples[i]).collect();
            let (loss, grads) = batch_loss_and_grad(&params, config, &batch, Some(&mut rng), true)?;
            let mut grads = grads.expect("requested");
            let n = batch.len() as f64;
            s_rd += loss.rd * n;
            s_rr += loss.rr * n;
            s_del += loss.del * n;
            let norm = global_norm(&grads);
            if !norm.is_finite() {
                return Err(ModelError::Divergence(format!("non-finite gradient in epoch {epoch}, batch {bi}")));
            }
            if config.grad_clip > 0.0 && norm > config.grad_clip {
                scale(&mut grads, (config.grad_clip / norm) as f32);
            }
            adam.update(&mut params, &grads, config, frozen);
        }
        if !params.is_finite() {
            return Err(ModelError::Divergence(format!("non-finite parameters after epoch {epoch}")));
        }
        let n = samples.len() as f64;
        let valid_em = exact_match_percent(&params, config, &vocab, valid)?;
        let line = EpochLog {
            epoch,
            l_rd: s_rd / n,
            l_rr: s_rr / n,
            l_del: s_del / n,
            l: (s_rd + s_rr + s_del) / n,
            valid_exact_match: valid_em,
        };
        on_epoch(&line);
        progress.log.push(line);
        if valid_em > progress.best_valid_exact_match {
            progress.best_valid_exact_match = valid_em;
            progress.best_epoch = epoch;
            progress.bad_epochs = 0;
            best = params.clone();
        } else {
            progress.bad_epochs += 1;
        }
        progress.epochs_done = epoch;
        progress.step = adam.step;
        if let Some(path) = &options.state_path {
            let st = StateFile {
                config: config.clone(),
                vocab: vocab.clone(),
                state: serde_json::to_value(&progress).map_err(|e| ModelError::Checkpoint(e.to_string()))?,
                groups: vec![
                    ("params".into(), params.clone()),
                    ("best".into(), best.clone()),
                    ("adam_m".into(), adam.m.clone()),
                    ("adam_v".into(), adam.v.clone()),
                ],
            };
            write_atomic(path, &st.to_bytes()?)?;
        }
    }
    if progress.epochs_done >= config.max_epochs {
        stop = finished(&progress).unwrap_or(StopReason::MaxEpochs);
    }
    Ok(TrainOutcome {
        checkpoint: Checkpoint {
            config: config.clone(),
            vocab,
            params: best,
        },
        log: progress.log,
        best_epoch: progress.best_epoch,
        best_valid_exact_match: progress.best_valid_exact_match.max(0.0),
        stop,
        initial_loss: progress.initial_loss,
    })
}
