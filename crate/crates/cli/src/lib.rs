//! The `convrewrite` command line: data generation, training, evaluation,
//! composition sweeps, latency benchmarks, one-shot rewriting and oracle
//! verification of datasets.

pub mod config;
pub mod data;

use std::fs;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use convrewrite_core::datagen::{
    generate_compositional, generate_single_task, stats_report, write_dataset, DatasetStats, LabeledExample,
    Resources, Split,
};
use convrewrite_core::edit_engine::{DroppedEdit, EditProgram, TokenSequence, UseCase};
use convrewrite_core::eval::{
    composition_sweep, evaluate, latency_bench, oracle_verify, EvalError, EvalReport, OraclePredictor, Predictor,
    MIN_REPS,
};
use convrewrite_core::model::embeddings::load_word2vec_text;
use convrewrite_core::model::train::{build_vocab, StopReason, TrainOptions};
use convrewrite_core::model::{train, EmbeddingMode, EpochLog, Prediction, Rewriter};
use rand::SeedableRng;
use serde::{Deserialize, Serialize};

pub use config::RunConfig;
pub use data::DataDir;

#[derive(Debug, Parser)]
#[command(name = "convrewrite", version, about = "Edit-based rewriting of conversational follow-up queries")]
pub struct Cli {
    /// TOML run configuration; defaults apply to missing keys.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true, value_name = "N")]
    pub seed: Option<u64>,
    /// Print machine-readable JSON instead of text.
    #[arg(long, global = true)]
    pub json: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate per-use-case and compositional datasets.
    Datagen {
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
        /// Overwrite a non-empty output directory.
        #[arg(long)]
        force: bool,
    },
    /// Train a model on a generated dataset.
    Train {
        #[arg(long, value_name = "DIR")]
        data: PathBuf,
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
        /// Continue from the training state left in the output directory.
        #[arg(long, conflicts_with = "force")]
        resume: bool,
        /// Discard an earlier run in the output directory.
        #[arg(long)]
        force: bool,
    },
    /// Exact match per task on a dataset split.
    Eval {
        #[arg(long, value_name = "DIR")]
        data: PathBuf,
        #[command(flatten)]
        model: ModelSource,
        #[arg(long, value_enum, default_value = "test")]
        split: SplitArg,
        #[arg(long, value_name = "DIR")]
        out: Option<PathBuf>,
    },
    /// Accuracy on compositional test data against the number of
    /// compositional training examples.
    Sweep {
        #[arg(long, value_name = "DIR")]
        data: PathBuf,
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
        /// Comma-separated sizes; overrides the configuration.
        #[arg(long, value_delimiter = ',')]
        sizes: Option<Vec<usize>>,
        /// Score the gold programs instead of training models.
        #[arg(long)]
        oracle: bool,
        #[arg(long)]
        force: bool,
    },
    /// Single-query latency against rewrite length.
    Bench {
        #[arg(long, value_name = "PATH")]
        checkpoint: PathBuf,
        #[arg(long, value_name = "DIR")]
        data: PathBuf,
        #[arg(long)]
        reps: Option<usize>,
        #[arg(long)]
        warmup: Option<usize>,
        #[arg(long, value_name = "DIR")]
        out: Option<PathBuf>,
    },
    /// Rewrite one follow-up query.
    Rewrite {
        /// Previous turn; may be empty.
        context: String,
        followup: String,
        #[command(flatten)]
        program: ProgramSource,
        /// Print the sequence after each substitution step and the program.
        #[arg(long)]
        trace: bool,
    },
    /// Re-apply every gold program and compare with the stored rewrite.
    OracleVerify {
        /// Dataset files or directories.
        #[arg(required = true)]
        paths: Vec<PathBuf>,
    },
}

#[derive(Debug, Args)]
#[group(required = true, multiple = false)]
pub struct ModelSource {
    #[arg(long, value_name = "PATH")]
    pub checkpoint: Option<PathBuf>,
    /// Apply the gold programs instead of a model.
    #[arg(long)]
    pub oracle: bool,
}

#[derive(Debug, Args)]
#[group(required = true, multiple = false)]
pub struct ProgramSource {
    #[arg(long, value_name = "PATH")]
    pub checkpoint: Option<PathBuf>,
    /// JSON edit program to apply instead of running a model.
    #[arg(long, value_name = "PATH")]
    pub gold_program: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, clap::ValueEnum)]
pub enum SplitArg {
    Train,
    Valid,
    Test,
}

impl From<SplitArg> for Split {
    fn from(s: SplitArg) -> Split {
        match s {
            SplitArg::Train => Split::Train,
            SplitArg::Valid => Split::Valid,
            SplitArg::Test => Split::Test,
        }
    }
}

/// Whether a command's check passed; only `oracle-verify` can fail
/// without an error.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    Ok,
    Failed,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetFile {
    /// Relative to the dataset directory.
    pub path: PathBuf,
    pub task: String,
    pub split: Split,
    pub examples: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskStats {
    pub task: String,
    pub stats: DatasetStats,
}

/// What `datagen` wrote.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatagenSummary {
    pub files: Vec<DatasetFile>,
    pub overall: DatasetStats,
    pub tasks: Vec<TaskStats>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainSummary {
    pub checkpoint: PathBuf,
    pub log: PathBuf,
    pub train_examples: usize,
    pub valid_examples: usize,
    pub epochs: usize,
    pub best_epoch: usize,
    pub best_valid_exact_match: f64,
    pub stop: StopReason,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProgramOrigin {
    Model,
    Gold,
}

/// Output of `rewrite`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RewriteRecord {
    pub context: String,
    pub followup: String,
    pub rewrite: String,
    pub tokens: Vec<String>,
    pub trace: Vec<String>,
    pub applied_order: Vec<UseCase>,
    pub dropped: Vec<DroppedEdit>,
    pub cycle_dropped: Vec<UseCase>,
    pub origin: ProgramOrigin,
    pub program: EditProgram,
}

pub fn run(cli: Cli, out: &mut dyn Write) -> anyhow::Result<Status> {
    let cfg = RunConfig::load(cli.config.as_deref(), cli.seed)?;
    let json = cli.json;
    match cli.command {
        Command::Datagen { out: dir, force } => cmd_datagen(&cfg, &dir, force, json, out),
        Command::Train {
            data,
            out: dir,
            resume,
            force,
        } => cmd_train(&cfg, &data, &dir, resume, force, json, out),
        Command::Eval {
            data,
            model,
            split,
            out: dir,
        } => cmd_eval(&cfg, &data, &model, split.into(), dir.as_deref(), json, out),
        Command::Sweep {
            data,
            out: dir,
            sizes,
            oracle,
            force,
        } => cmd_sweep(&cfg, &data, &dir, sizes, oracle, force, json, out),
        Command::Bench {
            checkpoint,
            data,
            reps,
            warmup,
            out: dir,
        } => cmd_bench(&cfg, &checkpoint, &data, reps, warmup, dir.as_deref(), json, out),
        Command::Rewrite {
            context,
            followup,
            program,
            trace,
        } => cmd_rewrite(&context, &followup, &program, trace, json, out),
        Command::OracleVerify { paths } => cmd_oracle_verify(&paths, json, out),
    }
}

fn print_json<T: Serialize>(out: &mut dyn Write, value: &T) -> anyhow::Result<()> {
    serde_json::to_writer(&mut *out, value)?;
    writeln!(out)?;
    Ok(())
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> anyhow::Result<()> {
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

fn is_nonempty_dir(dir: &Path) -> bool {
    fs::read_dir(dir).is_ok_and(|mut d| d.next().is_some())
}

/// Creates `dir`, refusing to reuse a non-empty one unless `force`.
fn prepare_out_dir(dir: &Path, force: bool) -> anyhow::Result<()> {
    if dir.exists() && !dir.is_dir() {
        bail!("{} exists and is not a directory", dir.display());
    }
    if is_nonempty_dir(dir) && !force {
        bail!("refusing to overwrite non-empty {}; pass --force", dir.display());
    }
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

pub fn cmd_datagen(cfg: &RunConfig, dir: &Path, force: bool, json: bool, out: &mut dyn Write) -> anyhow::Result<Status> {
    let res = match &cfg.datagen.resources {
        Some(p) => Resources::from_dir(p).with_context(|| format!("loading resources from {}", p.display()))?,
        None => Resources::builtin(),
    };
    let mut tasks: Vec<(String, Vec<LabeledExample>)> = Vec::new();
    for uc in UseCase::ALL {
        tasks.push((uc.as_str().to_owned(), generate_single_task(&res, uc, cfg.datagen.per_use_case, cfg.seed)?));
    }
    tasks.push((
        data::COMPOSITIONAL.to_owned(),
        generate_compositional(&res, cfg.datagen.compositional, cfg.seed)?,
    ));
    for (_, examples) in &tasks {
        if let Some(err) = examples.iter().find_map(|e| e.check_round_trip().err()) {
            bail!("generated example fails verification: {err}");
        }
    }

    prepare_out_dir(dir, force)?;
    let mut files = Vec::new();
    let mut task_stats = Vec::new();
    for (task, examples) in &tasks {
        fs::create_dir_all(dir.join(task))?;
        for split in data::SPLITS {
            let part: Vec<LabeledExample> = examples.iter().filter(|e| e.split == split).cloned().collect();
            let path = data::split_path(dir, task, split);
            write_dataset(&part, &path).with_context(|| format!("writing {}", path.display()))?;
            files.push(DatasetFile {
                path: path.strip_prefix(dir).expect("inside dir").to_owned(),
                task: task.clone(),
                split,
                examples: part.len(),
            });
        }
        task_stats.push(TaskStats {
            task: task.clone(),
            stats: stats_report(examples)?,
        });
    }
    let all: Vec<LabeledExample> = tasks.into_iter().flat_map(|(_, e)| e).collect();
    let summary = DatagenSummary {
        files,
        overall: stats_report(&all)?,
        tasks: task_stats,
    };
    let mut text = format!("{}", summary.overall);
    for t in &summary.tasks {
        text.push_str(&format!("\n[{}]\n{}", t.task, t.stats));
    }
    write_file(&dir.join("stats.txt"), &text)?;
    write_file(&dir.join("stats.json"), serde_json::to_string_pretty(&summary)? + "\n")?;
    cfg.echo_into(dir)?;

    if json {
        print_json(out, &summary)?;
    } else {
        for f in &summary.files {
            writeln!(out, "{:>7}  {}", f.examples, f.path.display())?;
        }
        writeln!(out, "{}", text.trim_end())?;
    }
    Ok(Status::Ok)
}

/// Training and validation sets: single-task data plus the first `n`
/// compositional training and `n / 8` validation examples.
fn training_sets(data: &DataDir, compositional: usize) -> anyhow::Result<(Vec<LabeledExample>, Vec<LabeledExample>)> {
    let mut train = data.single_split(Split::Train);
    let mut valid = data.single_split(Split::Valid);
    let c_train = data.compositional_split(Split::Train);
    if compositional > c_train.len() {
        bail!(
            "train.compositional = {compositional} but only {} compositional training examples exist",
            c_train.len()
        );
    }
    train.extend_from_slice(&c_train[..compositional]);
    let c_valid = data.compositional_split(Split::Valid);
    valid.extend_from_slice(&c_valid[..(compositional / 8).min(c_valid.len())]);
    if train.is_empty() || valid.is_empty() {
        bail!("training needs non-empty train and valid splits");
    }
    Ok((train, valid))
}

fn train_model(
    cfg: &RunConfig,
    train_set: &[LabeledExample],
    valid_set: &[LabeledExample],
    state_path: Option<PathBuf>,
    on_epoch: impl FnMut(&EpochLog),
) -> anyhow::Result<convrewrite_core::model::TrainOutcome> {
    let mut options = TrainOptions {
        state_path,
        stop_at_perfect: cfg.train.stop_at_perfect,
        ..Default::default()
    };
    if cfg.model.embedding == EmbeddingMode::Frozen {
        let Some(path) = &cfg.train.embeddings else {
            bail!("model.embedding = \"frozen\" needs train.embeddings");
        };
        let vocab = build_vocab(train_set)?;
        let file = fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(cfg.seed);
        let (table, hits) = load_word2vec_text(BufReader::new(file), &vocab, cfg.model.embed_dim, &mut rng)?;
        eprintln!("embeddings: {hits} of {} vocabulary entries found", vocab.len());
        options.frozen_embeddings = Some(table);
        options.vocab = Some(vocab);
    }
    Ok(train(train_set, valid_set, &cfg.model, &options, on_epoch)?)
}

pub const CHECKPOINT_FILE: &str = "model.ckpt";
pub const STATE_FILE: &str = "train_state.bin";
pub const LOG_FILE: &str = "train_log.jsonl";

pub fn cmd_train(
    cfg: &RunConfig,
    data_dir: &Path,
    dir: &Path,
    resume: bool,
    force: bool,
    json: bool,
    out: &mut dyn Write,
) -> anyhow::Result<Status> {
    let data = DataDir::load(data_dir)?;
    let (train_set, valid_set) = training_sets(&data, cfg.train.compositional)?;
    let state = dir.join(STATE_FILE);
    if resume {
        if !state.exists() {
            bail!("nothing to resume: {} does not exist", state.display());
        }
    } else {
        prepare_out_dir(dir, force)?;
        if state.exists() {
            fs::remove_file(&state)?;
        }
    }
    cfg.echo_into(dir)?;
    eprintln!(
        "training on {} examples, validating on {}: learning_rate {} batch_size {} dropout {}",
        train_set.len(),
        valid_set.len(),
        cfg.model.learning_rate,
        cfg.model.batch_size,
        cfg.model.dropout
    );

    let log_path = dir.join(LOG_FILE);
    let mut log = fs::File::create(&log_path).with_context(|| format!("creating {}", log_path.display()))?;
    let mut log_err = None;
    let outcome = train_model(cfg, &train_set, &valid_set, Some(state), |l| {
        eprintln!(
            "epoch {:>3}  L {:.4} (rd {:.4} rr {:.4} del {:.4})  valid {:.2}%",
            l.epoch, l.l, l.l_rd, l.l_rr, l.l_del, l.valid_exact_match
        );
        let line = serde_json::to_string(l).expect("plain data");
        if let Err(e) = writeln!(log, "{line}") {
            log_err.get_or_insert(e);
        }
    })?;
    if let Some(e) = log_err {
        return Err(e).context("writing the training log");
    }
    let ckpt = dir.join(CHECKPOINT_FILE);
    outcome.checkpoint.save(&ckpt)?;
    let summary = TrainSummary {
        checkpoint: ckpt,
        log: log_path,
        train_examples: train_set.len(),
        valid_examples: valid_set.len(),
        epochs: outcome.log.len(),
        best_epoch: outcome.best_epoch,
        best_valid_exact_match: outcome.best_valid_exact_match,
        stop: outcome.stop,
    };
    if json {
        print_json(out, &summary)?;
    } else {
        writeln!(
            out,
            "best epoch {} of {} ({:.2}% valid exact match), stopped: {:?}",
            summary.best_epoch, summary.epochs, summary.best_valid_exact_match, summary.stop
        )?;
        writeln!(out, "checkpoint {}", summary.checkpoint.display())?;
    }
    Ok(Status::Ok)
}

fn load_predictor(source: &ModelSource) -> anyhow::Result<Box<dyn Predictor>> {
    Ok(match &source.checkpoint {
        Some(p) => Box::new(Rewriter::load(p).with_context(|| format!("loading {}", p.display()))?),
        None => Box::new(OraclePredictor),
    })
}

#[allow(clippy::too_many_arguments)]
pub fn cmd_eval(
    cfg: &RunConfig,
    data_dir: &Path,
    source: &ModelSource,
    split: Split,
    dir: Option<&Path>,
    json: bool,
    out: &mut dyn Write,
) -> anyhow::Result<Status> {
    let data = DataDir::load(data_dir)?;
    let mut dataset = data.single_split(split);
    dataset.extend(data.compositional_split(split));
    let predictor = load_predictor(source)?;
    let report: EvalReport = evaluate(predictor.as_ref(), &dataset)?;
    if let Some(dir) = dir {
        fs::create_dir_all(dir)?;
        write_file(&dir.join("eval.txt"), report.to_string())?;
        write_file(&dir.join("eval.jsonl"), report.to_jsonl())?;
        cfg.echo_into(dir)?;
    }
    if json {
        print_json(out, &report)?;
    } else {
        write!(out, "{report}")?;
    }
    Ok(Status::Ok)
}

/// A trained model or the gold-program oracle.
enum SweepModel {
    Oracle,
    Trained(Box<Rewriter>),
}

impl Predictor for SweepModel {
    fn predict(&self, examples: &[LabeledExample]) -> Result<Vec<Prediction>, EvalError> {
        match self {
            SweepModel::Oracle => OraclePredictor.predict(examples),
            SweepModel::Trained(r) => Predictor::predict(r.as_ref(), examples),
        }
    }
}

#[allow(clippy::too_many_arguments)]
pub fn cmd_sweep(
    cfg: &RunConfig,
    data_dir: &Path,
    dir: &Path,
    sizes: Option<Vec<usize>>,
    oracle: bool,
    force: bool,
    json: bool,
    out: &mut dyn Write,
) -> anyhow::Result<Status> {
    let mut data = DataDir::load(data_dir)?;
    if let Some(n) = cfg.sweep.single_per_use_case {
        data.cap_single(n);
    }
    let sizes = sizes.unwrap_or_else(|| cfg.sweep.sizes.clone());
    if sizes.is_empty() {
        bail!("no sweep sizes given");
    }
    prepare_out_dir(dir, force)?;
    cfg.echo_into(dir)?;
    let mut size_iter = sizes.iter();
    let curve = composition_sweep(
        |train_set, valid_set| {
            let size = *size_iter.next().expect("one model per size");
            if oracle {
                return Ok(SweepModel::Oracle);
            }
            eprintln!("size {size}: training on {} examples", train_set.len());
            let outcome = train_model(cfg, train_set, valid_set, None, |l| {
                eprintln!("  epoch {:>3}  L {:.4}  valid {:.2}%", l.epoch, l.l, l.valid_exact_match)
            })
            .map_err(|e| match e.downcast::<convrewrite_core::model::ModelError>() {
                Ok(m) => EvalError::Model(m),
                Err(e) => EvalError::Model(convrewrite_core::model::ModelError::Config(format!("{e:#}"))),
            })?;
            outcome.checkpoint.save(&dir.join(format!("model-{size}.ckpt")))?;
            Ok(SweepModel::Trained(Box::new(Rewriter::new(outcome.checkpoint))))
        },
        &data.single,
        &data.compositional,
        &sizes,
        |p| eprintln!("size {}: {:.2}% exact match", p.size, p.exact_match),
    )?;
    write_file(&dir.join("sweep.tsv"), curve.to_tsv())?;
    write_file(&dir.join("sweep.jsonl"), curve.to_jsonl())?;
    if json {
        print_json(out, &curve)?;
    } else {
        write!(out, "{curve}")?;
    }
    Ok(Status::Ok)
}

#[allow(clippy::too_many_arguments)]
pub fn cmd_bench(
    cfg: &RunConfig,
    checkpoint: &Path,
    data_dir: &Path,
    reps: Option<usize>,
    warmup: Option<usize>,
    dir: Option<&Path>,
    json: bool,
    out: &mut dyn Write,
) -> anyhow::Result<Status> {
    let reps = reps.unwrap_or(cfg.bench.reps);
    if reps < MIN_REPS {
        bail!("at least {MIN_REPS} repetitions are needed, got {reps}");
    }
    let rewriter = Rewriter::load(checkpoint).with_context(|| format!("loading {}", checkpoint.display()))?;
    let data = DataDir::load(data_dir)?;
    let mut dataset = data.single_split(Split::Test);
    dataset.extend(data.compositional_split(Split::Test));
    let report = latency_bench(&rewriter, &dataset, warmup.unwrap_or(cfg.bench.warmup), reps)?;
    if let Some(dir) = dir {
        fs::create_dir_all(dir)?;
        write_file(&dir.join("bench.txt"), report.to_string())?;
        write_file(&dir.join("bench.json"), serde_json::to_string_pretty(&report)? + "\n")?;
        cfg.echo_into(dir)?;
    }
    if json {
        print_json(out, &report)?;
    } else {
        write!(out, "{report}")?;
    }
    Ok(Status::Ok)
}

pub fn cmd_rewrite(
    context: &str,
    followup: &str,
    source: &ProgramSource,
    trace: bool,
    json: bool,
    out: &mut dyn Write,
) -> anyhow::Result<Status> {
    let seq = TokenSequence::from_text(context, followup)?;
    let (program, origin) = match (&source.gold_program, &source.checkpoint) {
        (Some(p), _) => {
            let src = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            let program: EditProgram =
                serde_json::from_str(&src).with_context(|| format!("parsing edit program {}", p.display()))?;
            (program, ProgramOrigin::Gold)
        }
        (None, Some(c)) => {
            let r = Rewriter::load(c).with_context(|| format!("loading {}", c.display()))?;
            (r.predict_program(&seq)?, ProgramOrigin::Model)
        }
        (None, None) => bail!("pass --checkpoint or --gold-program"),
    };
    let pred = Prediction::from_program(&seq, program);
    let result = match pred.outcome {
        Ok(r) => r,
        Err(e) => bail!("no rewrite: {e}"),
    };
    let record = RewriteRecord {
        context: context.to_owned(),
        followup: followup.to_owned(),
        rewrite: result.text(),
        tokens: result.tokens,
        trace: result.trace,
        applied_order: result.applied_order,
        dropped: result.dropped,
        cycle_dropped: pred.cycle_dropped,
        origin,
        program: pred.program,
    };
    for d in &record.dropped {
        let reasons: Vec<String> = d.reasons.iter().map(|r| r.to_string()).collect();
        eprintln!("warning: dropped {} edits: {}", d.use_case, reasons.join("; "));
    }
    for uc in &record.cycle_dropped {
        eprintln!("warning: dropped {uc} edits to break a dependency cycle");
    }
    if json {
        print_json(out, &record)?;
    } else {
        if trace {
            for line in &record.trace {
                writeln!(out, "{line}")?;
            }
        }
        writeln!(out, "{}", record.rewrite)?;
        if trace {
            writeln!(out, "program: {}", serde_json::to_string(&record.program)?)?;
        }
    }
    Ok(Status::Ok)
}

pub fn cmd_oracle_verify(paths: &[PathBuf], json: bool, out: &mut dyn Write) -> anyhow::Result<Status> {
    let examples = data::read_examples(paths)?;
    let report = oracle_verify(&examples);
    if json {
        print_json(out, &report)?;
    } else {
        for m in &report.mismatches {
            writeln!(out, "MISMATCH {}: expected {:?}, got {:?}", m.id, m.expected, m.got)?;
        }
        writeln!(
            out,
            "{} examples checked, {} mismatches",
            report.checked,
            report.mismatches.len()
        )?;
    }
    Ok(if report.passed() { Status::Ok } else { Status::Failed })
}
