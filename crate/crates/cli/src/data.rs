//! Dataset directories: one subdirectory per task holding
//! `train.jsonl`, `valid.jsonl` and `test.jsonl`.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use convrewrite_core::datagen::{read_dataset, LabeledExample, Split};
use convrewrite_core::edit_engine::UseCase;

pub const COMPOSITIONAL: &str = "compositional";

pub const SPLITS: [Split; 3] = [Split::Train, Split::Valid, Split::Test];

pub fn split_name(split: Split) -> &'static str {
    match split {
        Split::Train => "train",
        Split::Valid => "valid",
        Split::Test => "test",
    }
}

pub fn split_path(dir: &Path, task: &str, split: Split) -> PathBuf {
    dir.join(task).join(format!("{}.jsonl", split_name(split)))
}

/// Single-task and compositional examples of a dataset directory.
#[derive(Clone, Debug, Default)]
pub struct DataDir {
    pub single: Vec<LabeledExample>,
    pub compositional: Vec<LabeledExample>,
}

impl DataDir {
    /// Loads every split file present. At least one single-task file must
    /// exist.
    pub fn load(dir: &Path) -> anyhow::Result<Self> {
        if !dir.is_dir() {
            bail!("dataset directory {} does not exist", dir.display());
        }
        let mut out = DataDir::default();
        for uc in UseCase::ALL {
            for split in SPLITS {
                let p = split_path(dir, uc.as_str(), split);
                if p.exists() {
                    out.single.extend(read(&p)?);
                }
            }
        }
        for split in SPLITS {
            let p = split_path(dir, COMPOSITIONAL, split);
            if p.exists() {
                out.compositional.extend(read(&p)?);
            }
        }
        if out.single.is_empty() {
            bail!("no single-task data under {}", dir.display());
        }
        Ok(out)
    }

    pub fn single_split(&self, split: Split) -> Vec<LabeledExample> {
        of(&self.single, split)
    }

    pub fn compositional_split(&self, split: Split) -> Vec<LabeledExample> {
        of(&self.compositional, split)
    }

    /// Keeps at most `n` single-task training examples per use case and
    /// `n / 8` validation and test examples.
    pub fn cap_single(&mut self, n: usize) {
        let mut seen = std::collections::HashMap::new();
        self.single.retain(|e| {
            let cap = if e.split == Split::Train { n } else { n / 8 };
            let k = seen.entry((e.use_cases.clone(), e.split)).or_insert(0usize);
            *k += 1;
            *k <= cap
        });
    }
}

fn of(data: &[LabeledExample], split: Split) -> Vec<LabeledExample> {
    data.iter().filter(|e| e.split == split).cloned().collect()
}

fn read(path: &Path) -> anyhow::Result<Vec<LabeledExample>> {
    read_dataset(path).with_context(|| format!("reading {}", path.display()))
}

/// All `.jsonl` files under `path`, or `path` itself if it is a file.
pub fn jsonl_files(path: &Path) -> anyhow::Result<Vec<PathBuf>> {
    if path.is_file() {
        return Ok(vec![path.to_owned()]);
    }
    if !path.is_dir() {
        bail!("{} does not exist", path.display());
    }
    let mut out = Vec::new();
    let mut stack = vec![path.to_owned()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d).with_context(|| format!("listing {}", d.display()))? {
            let p = entry?.path();
            if p.is_dir() {
                stack.push(p);
            } else if p.extension().is_some_and(|x| x == "jsonl") {
                out.push(p);
            }
        }
    }
    out.sort();
    Ok(out)
}

/// Reads examples from files or directories, in path order.
pub fn read_examples(paths: &[PathBuf]) -> anyhow::Result<Vec<LabeledExample>> {
    let mut out = Vec::new();
    for p in paths {
        for f in jsonl_files(p)? {
            out.extend(read(&f)?);
        }
    }
    Ok(out)
}
