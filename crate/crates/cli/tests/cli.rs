use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use convrewrite::{DatagenSummary, RewriteRecord, RunConfig, TrainSummary};
use convrewrite_core::datagen::{parse_jsonl, read_dataset, to_jsonl};
use convrewrite_core::edit_engine::{EditProgram, Span, UseCase};
use convrewrite_core::eval::{EvalReport, LatencyReport, OracleReport, SweepCurve};
use convrewrite_core::model::EpochLog;

const SMALL: &str = "seed = 11
[datagen]
per_use_case = 100
compositional = 200
[model]
embed_dim = 8
hidden_dim = 8
proj_dim = 8
batch_size = 16
max_epochs = 3
";

fn use_case_examples() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures/use_case_examples.jsonl")
}

fn bin(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_convrewrite"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str], cwd: &Path) -> String {
    let o = bin(args, cwd);
    assert!(
        o.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&o.stderr)
    );
    String::from_utf8(o.stdout).unwrap()
}

fn fails(args: &[&str], cwd: &Path) -> String {
    let o = bin(args, cwd);
    assert!(!o.status.success(), "{args:?} should fail");
    String::from_utf8_lossy(&o.stderr).into_owned() + &String::from_utf8_lossy(&o.stdout)
}

/// A temp dir holding `small.toml` and a generated dataset in `data/`.
fn workspace() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("small.toml"), SMALL).unwrap();
    ok(&["--config", "small.toml", "datagen", "--out", "data"], dir.path());
    dir
}

fn write_program(dir: &Path, program: &EditProgram) -> String {
    let p = dir.join("program.json");
    fs::write(&p, serde_json::to_string(program).unwrap()).unwrap();
    p.to_str().unwrap().to_owned()
}

fn homer() -> EditProgram {
    EditProgram::empty()
        .with_substitution(UseCase::Entity, Span::new(2, 4), Span::new(9, 10))
        .with_substitution(UseCase::Repair, Span::new(9, 12), Span::new(2, 6))
        .with_deletions(UseCase::Repair, [6, 7, 8])
}

fn files_under(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_owned()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push((p.strip_prefix(dir).unwrap().to_owned(), fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

#[test]
fn datagen_is_reproducible_and_split_8_1_1() {
    let ws = workspace();
    ok(&["--config", "small.toml", "datagen", "--out", "again"], ws.path());
    let a = files_under(&ws.path().join("data"));
    let b = files_under(&ws.path().join("again"));
    assert!(a.len() >= 20);
    assert_eq!(a, b);

    for task in ["intent", "entity", "repair", "disfluency", "steering"] {
        let n = |s: &str| read_dataset(&ws.path().join("data").join(task).join(format!("{s}.jsonl"))).unwrap().len();
        assert_eq!((n("train"), n("valid"), n("test")), (80, 10, 10), "{task}");
    }
    let n = |s: &str| {
        read_dataset(&ws.path().join("data/compositional").join(format!("{s}.jsonl")))
            .unwrap()
            .len()
    };
    assert_eq!((n("train"), n("valid"), n("test")), (160, 20, 20));
    assert!(ws.path().join("data/stats.txt").exists());

    ok(&["--config", "small.toml", "--seed", "12", "datagen", "--out", "other"], ws.path());
    assert_ne!(a, files_under(&ws.path().join("other")));
}

#[test]
fn datagen_refuses_to_overwrite_without_force() {
    let ws = workspace();
    let err = fails(&["--config", "small.toml", "datagen", "--out", "data"], ws.path());
    assert!(err.contains("--force"), "{err}");
    ok(&["--config", "small.toml", "datagen", "--out", "data", "--force"], ws.path());
}

#[test]
fn default_config_is_echoed() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("c.toml"), "[datagen]\nper_use_case = 10\ncompositional = 10\n").unwrap();
    ok(&["--config", "c.toml", "datagen", "--out", "d"], dir.path());
    let echoed = fs::read_to_string(dir.path().join("d/config.toml")).unwrap();
    let cfg = RunConfig::parse(&echoed).unwrap();
    assert_eq!(cfg.model.learning_rate, 6e-4);
    assert_eq!(cfg.model.batch_size, 64);
    assert_eq!(cfg.model.dropout, 0.2);
    assert_eq!((cfg.model.embed_dim, cfg.model.hidden_dim), (192, 128));
    assert!(echoed.contains("learning_rate = 0.0006"), "{echoed}");
}

#[test]
fn unknown_config_keys_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("bad.toml"), "[model]\nlearnig_rate = 0.1\n").unwrap();
    let err = fails(&["--config", "bad.toml", "datagen", "--out", "d"], dir.path());
    assert!(err.contains("learnig_rate"), "{err}");
    assert!(!dir.path().join("d").exists());
}

#[test]
fn training_resumes_deterministically() {
    let ws = workspace();
    let one = SMALL.replace("max_epochs = 3", "max_epochs = 1");
    fs::write(ws.path().join("one.toml"), one).unwrap();
    let full: TrainSummary = serde_json::from_str(&ok(
        &["--config", "small.toml", "--json", "train", "--data", "data", "--out", "full"],
        ws.path(),
    ))
    .unwrap();
    assert_eq!(full.epochs, 3);
    ok(&["--config", "one.toml", "train", "--data", "data", "--out", "split"], ws.path());
    ok(&["--config", "small.toml", "train", "--data", "data", "--out", "split", "--resume"], ws.path());

    let read = |d: &str, f: &str| fs::read(ws.path().join(d).join(f)).unwrap();
    assert_eq!(read("full", "model.ckpt"), read("split", "model.ckpt"));
    assert_eq!(read("full", "train_log.jsonl"), read("split", "train_log.jsonl"));
    let log = String::from_utf8(read("full", "train_log.jsonl")).unwrap();
    let lines: Vec<EpochLog> = log.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(lines.iter().map(|l| l.epoch).collect::<Vec<_>>(), [1, 2, 3]);

    let err = fails(&["--config", "small.toml", "train", "--data", "data", "--out", "full"], ws.path());
    assert!(err.contains("--force"), "{err}");
    let err = fails(&["--config", "small.toml", "train", "--data", "data", "--out", "nowhere", "--resume"], ws.path());
    assert!(err.contains("resume"), "{err}");
}

#[test]
fn missing_data_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let err = fails(&["train", "--data", "missing", "--out", "m"], dir.path());
    assert!(err.contains("missing"), "{err}");
}

#[test]
fn golden_trace_with_gold_program() {
    let dir = tempfile::tempdir().unwrap();
    let prog = write_program(dir.path(), &homer());
    let out = ok(
        &[
            "rewrite",
            "Who is Homer Simpson's eldest doctor",
            "I said his eldest daughter",
            "--gold-program",
            &prog,
            "--trace",
        ],
        dir.path(),
    );
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines[0], "Who is eldest doctor [SEP] I said Homer Simpson's eldest daughter");
    assert_eq!(lines[1], "Who is Homer Simpson's eldest daughter [SEP] I said");
    assert_eq!(lines[2], "Who is Homer Simpson's eldest daughter");
    let program: EditProgram = serde_json::from_str(lines[3].strip_prefix("program: ").unwrap()).unwrap();
    assert_eq!(program, homer());

    let plain = ok(
        &["rewrite", "Who is Homer Simpson's eldest doctor", "I said his eldest daughter", "--gold-program", &prog],
        dir.path(),
    );
    assert_eq!(plain, "Who is Homer Simpson's eldest daughter\n");
}

#[test]
fn rewrite_json_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let prog = write_program(dir.path(), &homer());
    let out = ok(
        &[
            "--json",
            "rewrite",
            "Who is Homer Simpson's eldest doctor",
            "I said his eldest daughter",
            "--gold-program",
            &prog,
        ],
        dir.path(),
    );
    let rec: RewriteRecord = serde_json::from_str(&out).unwrap();
    assert_eq!(rec.rewrite, "Who is Homer Simpson's eldest daughter");
    assert_eq!(rec.applied_order, [UseCase::Entity, UseCase::Repair]);
    assert_eq!(rec.trace.len(), 2);
    assert_eq!(rec.program, homer());
    assert_eq!(serde_json::to_string(&rec).unwrap(), out.trim_end());
}

#[test]
fn empty_context_is_accepted() {
    let dir = tempfile::tempdir().unwrap();
    let prog = EditProgram::empty()
        .with_substitution(UseCase::Disfluency, Span::new(8, 10), Span::new(3, 5))
        .with_deletions(UseCase::Disfluency, [5, 6, 7]);
    let prog = write_program(dir.path(), &prog);
    let out = ok(
        &["rewrite", "", "Take me to Suki Sushi no I said Fuki Sushi", "--gold-program", &prog],
        dir.path(),
    );
    assert_eq!(out, "Take me to Fuki Sushi\n");
}

#[test]
fn empty_followup_and_empty_rewrite_fail() {
    let dir = tempfile::tempdir().unwrap();
    let empty = write_program(dir.path(), &EditProgram::empty());
    let err = fails(&["rewrite", "Play Sweeny Todd", "  ", "--gold-program", &empty], dir.path());
    assert!(err.contains("empty"), "{err}");

    let all = EditProgram::empty().with_deletions(UseCase::Disfluency, [0, 1]);
    let all = write_program(dir.path(), &all);
    let err = fails(&["rewrite", "", "uh um", "--gold-program", &all], dir.path());
    assert!(err.contains("no rewrite"), "{err}");
}

#[test]
fn rewrite_with_a_trained_checkpoint() {
    let ws = workspace();
    ok(&["--config", "small.toml", "train", "--data", "data", "--out", "m"], ws.path());
    let o = bin(
        &["--json", "rewrite", "Play Sweeny Todd", "in my living room", "--checkpoint", "m/model.ckpt"],
        ws.path(),
    );
    // An untrained-quality model may produce no rewrite; either way the
    // output is well-formed.
    if o.status.success() {
        let rec: RewriteRecord = serde_json::from_slice(&o.stdout).unwrap();
        assert!(!rec.tokens.is_empty());
    } else {
        assert!(String::from_utf8_lossy(&o.stderr).contains("no rewrite"));
    }
    let err = fails(&["rewrite", "a", "b", "--checkpoint", "m/missing.ckpt"], ws.path());
    assert!(err.contains("missing.ckpt"), "{err}");
}

#[test]
fn oracle_eval_is_perfect_everywhere() {
    let ws = workspace();
    let out = ok(&["--json", "eval", "--data", "data", "--oracle", "--out", "ev"], ws.path());
    let report: EvalReport = serde_json::from_str(&out).unwrap();
    assert_eq!(report.tasks.len(), 10);
    assert!(report.tasks.iter().all(|t| t.exact_match == 100.0));
    assert_eq!(report.macro_average, 100.0);
    assert!(report.failures.values().all(|&n| n == 0));
    assert!(ws.path().join("ev/config.toml").exists());
    let jsonl = fs::read_to_string(ws.path().join("ev/eval.jsonl")).unwrap();
    let last: EvalReport = serde_json::from_str(jsonl.lines().last().unwrap()).unwrap();
    assert_eq!(last, report);

    let text = ok(&["eval", "--data", "data", "--oracle"], ws.path());
    assert!(text.contains("100.00"));
}

#[test]
fn oracle_sweep_includes_size_zero() {
    let ws = workspace();
    let out = ok(
        &["--json", "--config", "small.toml", "sweep", "--data", "data", "--out", "sw", "--oracle", "--sizes", "0,50,160"],
        ws.path(),
    );
    let curve: SweepCurve = serde_json::from_str(&out).unwrap();
    assert_eq!(curve.points.iter().map(|p| p.size).collect::<Vec<_>>(), [0, 50, 160]);
    assert!(curve.points.iter().all(|p| p.exact_match == 100.0));
    let tsv = fs::read_to_string(ws.path().join("sw/sweep.tsv")).unwrap();
    assert!(tsv.starts_with("size\taccuracy\n0\t"), "{tsv}");

    let err = fails(
        &["--config", "small.toml", "sweep", "--data", "data", "--out", "sw2", "--oracle", "--sizes", "161"],
        ws.path(),
    );
    assert!(err.contains("161"), "{err}");
}

#[test]
fn model_sweep_and_bench() {
    let ws = workspace();
    let cfg = SMALL.replace("max_epochs = 3", "max_epochs = 1");
    fs::write(ws.path().join("one.toml"), cfg).unwrap();
    let out = ok(
        &["--json", "--config", "one.toml", "sweep", "--data", "data", "--out", "sw", "--sizes", "0,20"],
        ws.path(),
    );
    let curve: SweepCurve = serde_json::from_str(&out).unwrap();
    assert_eq!(curve.points.len(), 2);
    assert_eq!(curve.points[1].train_examples, curve.points[0].train_examples + 20);
    assert!(ws.path().join("sw/model-20.ckpt").exists());

    let err = fails(&["bench", "--checkpoint", "sw/model-0.ckpt", "--data", "data", "--reps", "99"], ws.path());
    assert!(err.contains("100"), "{err}");
    let out = ok(
        &["--json", "bench", "--checkpoint", "sw/model-0.ckpt", "--data", "data", "--reps", "100", "--warmup", "5"],
        ws.path(),
    );
    let report: LatencyReport = serde_json::from_str(&out).unwrap();
    assert_eq!(report.queries, 100);
    assert_eq!(report.encoder_passes_per_query, 1.0);
}

#[test]
fn oracle_verify_passes_fresh_data_and_use_case_examples() {
    let ws = workspace();
    let out = ok(&["--json", "oracle-verify", "data"], ws.path());
    let report: OracleReport = serde_json::from_str(&out).unwrap();
    assert_eq!(report.checked, 700);
    assert!(report.passed());
    let out = ok(&["oracle-verify", use_case_examples().to_str().unwrap()], ws.path());
    assert!(out.contains("7 examples checked, 0 mismatches"), "{out}");
}

#[test]
fn oracle_verify_names_a_corrupted_example() {
    let ws = workspace();
    let path = ws.path().join("data/repair/test.jsonl");
    let mut examples = parse_jsonl(&fs::read_to_string(&path).unwrap()).unwrap();
    let victim = &mut examples[3];
    let sub = victim.program.get(UseCase::Repair).substitution.unwrap();
    let shifted = Span::new(sub.replaced.start + 1, sub.replaced.end + 1);
    victim.program.set_substitution(UseCase::Repair, sub.replacement, shifted);
    let id = victim.id.clone();
    fs::write(&path, to_jsonl(&examples)).unwrap();

    let o = bin(&["oracle-verify", "data"], ws.path());
    assert!(!o.status.success());
    let stdout = String::from_utf8(o.stdout).unwrap();
    assert!(stdout.contains(&format!("MISMATCH {id}")), "{stdout}");
    assert!(stdout.contains("1 mismatches"), "{stdout}");

    let o = bin(&["--json", "oracle-verify", "data/repair/test.jsonl"], ws.path());
    assert!(!o.status.success());
    let report: OracleReport = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(report.mismatches.len(), 1);
    assert_eq!(report.mismatches[0].id, id);
}

#[test]
fn datagen_json_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("c.toml"), "[datagen]\nper_use_case = 20\ncompositional = 20\n").unwrap();
    let out = ok(&["--config", "c.toml", "--json", "datagen", "--out", "d"], dir.path());
    let summary: DatagenSummary = serde_json::from_str(&out).unwrap();
    assert_eq!(summary.files.len(), 18);
    assert_eq!(summary.overall.examples, 120);
    let on_disk: DatagenSummary =
        serde_json::from_str(&fs::read_to_string(dir.path().join("d/stats.json")).unwrap()).unwrap();
    assert_eq!(on_disk, summary);
}

#[test]
fn bad_arguments_fail() {
    let dir = tempfile::tempdir().unwrap();
    fails(&["rewrite", "a", "b"], dir.path());
    fails(&["eval", "--data", "d"], dir.path());
    fails(&["frobnicate"], dir.path());
    fails(&["oracle-verify"], dir.path());
    fails(&["oracle-verify", "nope.jsonl"], dir.path());
}
