//! Synthetic labeled data for the five use cases and their pairwise
//! compositions.
//!
//! Examples come from query templates whose gold edits are written as
//! markup inside the patterns. Every generated example is checked against
//! the edit engine: its gold program must validate and reproduce the gold
//! rewrite.

mod catalog;
mod generate;
mod io;
mod stats;
mod template;

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::edit_engine::{apply_program, validate_program, EditProgram, EngineError, TokenSequence, UseCase};

pub use catalog::{in_eval_pool, Catalogs, Entity, EntityCatalog, EntityPool, Gender, PhraseInventory, PronounCase};
pub use generate::{generate_compositional, generate_single_task, split_sizes, CHALLENGE_PAIRS};
pub use io::{parse_jsonl, read_dataset, to_jsonl, write_dataset};
pub use stats::{stats_report, DatasetStats, REFERENCE_STATS};
pub use template::{Instance, Piece, QueryTemplate, SepRule, SlotForm, SpanRole, TemplatePool};

pub const BUILTIN_CATALOG: &str = include_str!("../../data/catalog.txt");
pub const BUILTIN_PHRASES: &str = include_str!("../../data/phrases.txt");
pub const BUILTIN_TEMPLATES: &str = include_str!("../../data/templates.txt");

#[derive(Debug, Error)]
pub enum DatagenError {
    #[error("{file}:{line}: {msg}")]
    Parse { file: String, line: usize, msg: String },
    #[error("template {template:?} uses unknown domain {domain:?}")]
    UnknownDomain { template: String, domain: String },
    #[error("template {template:?} uses unknown phrase inventory {name:?}")]
    UnknownInventory { template: String, name: String },
    #[error("domain {domain:?} needs {need} distinct entries, pool has {have}")]
    InsufficientEntities { domain: String, need: usize, have: usize },
    #[error("template {id:?}: {detail}")]
    TemplateInconsistent { id: String, detail: String },
    #[error("no templates for {0}")]
    NoTemplates(String),
    #[error("example count must be at least 1")]
    InvalidCount,
    #[error("line {line}: {msg}")]
    Record { line: usize, msg: String },
    #[error("dataset is empty")]
    EmptyDataset,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Valid,
    Test,
}

/// One dataset record.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LabeledExample {
    pub id: String,
    pub use_cases: Vec<UseCase>,
    pub context: Vec<String>,
    pub followup: Vec<String>,
    pub rewrite: Vec<String>,
    pub split: Split,
    pub program: EditProgram,
    /// Id of the generating template. Absent in hand-written records.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub template: Option<String>,
}

impl LabeledExample {
    pub fn sequence(&self) -> Result<TokenSequence, EngineError> {
        TokenSequence::concat_turns(&self.context, &self.followup)
    }

    /// Checks that the gold program is valid and reproduces the rewrite.
    pub fn check_round_trip(&self) -> Result<(), String> {
        let seq = self.sequence().map_err(|e| e.to_string())?;
        let report = validate_program(&seq, &self.program);
        if !report.is_valid() {
            return Err(format!("{}: invalid program {:?}", self.id, report.violations));
        }
        let got = apply_program(&seq, &self.program).map_err(|e| format!("{}: {e}", self.id))?;
        if got.tokens != self.rewrite {
            return Err(format!("{}: engine gives {:?}, gold is {:?}", self.id, got.text(), self.rewrite.join(" ")));
        }
        Ok(())
    }

    pub fn is_compositional(&self) -> bool {
        self.use_cases.len() > 1
    }
}

/// Catalogs, phrase inventories and templates.
#[derive(Clone, Debug)]
pub struct Resources {
    pub catalogs: Catalogs,
    pub phrases: PhraseInventory,
    pub templates: Vec<QueryTemplate>,
}

impl Resources {
    pub fn parse(catalog: &str, phrases: &str, templates: &str) -> Result<Self, DatagenError> {
        let r = Resources {
            catalogs: Catalogs::parse(catalog)?,
            phrases: PhraseInventory::parse(phrases)?,
            templates: QueryTemplate::parse_all(templates)?,
        };
        r.check()?;
        Ok(r)
    }

    /// The shipped data files.
    pub fn builtin() -> Self {
        Self::parse(BUILTIN_CATALOG, BUILTIN_PHRASES, BUILTIN_TEMPLATES).expect("built-in data files are valid")
    }

    /// Loads `catalog.txt`, `phrases.txt` and `templates.txt` from `dir`.
    pub fn from_dir(dir: &Path) -> Result<Self, DatagenError> {
        let read = |name: &str| std::fs::read_to_string(dir.join(name));
        Self::parse(&read("catalog.txt")?, &read("phrases.txt")?, &read("templates.txt")?)
    }

    fn check(&self) -> Result<(), DatagenError> {
        for t in &self.templates {
            let pool = match t.pool {
                TemplatePool::Any => EntityPool::All,
                TemplatePool::Train => EntityPool::Train,
                TemplatePool::Eval => EntityPool::Eval,
            };
            t.check_resources(&self.catalogs, &self.phrases, pool)?;
            let single = t.use_cases.len() == 1;
            let bad = |detail: &str| DatagenError::TemplateInconsistent {
                id: t.id.clone(),
                detail: detail.into(),
            };
            if single && t.pool != TemplatePool::Any {
                return Err(bad("single-task templates use pool `any`"));
            }
            if !single {
                if t.pool == TemplatePool::Any {
                    return Err(bad("compositional templates use pool `train` or `eval`"));
                }
                if !CHALLENGE_PAIRS.iter().any(|p| p[..] == t.use_cases[..]) {
                    return Err(bad("use cases are not one of the challenge pairs"));
                }
            }
        }
        Ok(())
    }

    pub fn single_task_templates(&self, uc: UseCase) -> Vec<&QueryTemplate> {
        self.templates.iter().filter(|t| t.use_cases == [uc]).collect()
    }

    pub fn compositional_templates(&self, pool: TemplatePool) -> Vec<&QueryTemplate> {
        self.templates
            .iter()
            .filter(|t| t.use_cases.len() > 1 && t.pool == pool)
            .collect()
    }
}
