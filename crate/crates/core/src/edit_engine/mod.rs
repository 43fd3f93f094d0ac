//! Deterministic application of edit programs to token sequences.
//!
//! A program holds, for each of the five use cases, at most one
//! substitution (move a replacement span into the place of a replaced span)
//! and a set of deleted token indices. Deletions only flag cells, so they
//! commute with substitutions. Substitutions are applied in dependency
//! order; cells spliced by an earlier substitution into a region of a later
//! one become part of that region.

mod apply;
mod order;
mod program;
mod search;
mod sequence;
mod validate;

use thiserror::Error;

pub use apply::{apply_program, apply_with_deletion_stage, extract_rewrite, RewriteResult};
pub use order::{build_dependency_order, dependency_edges, depends_on};
pub use program::{EditProgram, Span, SpanRelation, Substitution, UseCase, UseCaseEdits};
pub use search::{derive_program_bruteforce, SEARCH_BOUND};
pub use sequence::{join_tokens, tokenize, Segment, TokenCell, TokenSequence, SEP};
pub use validate::{sanitize, validate_program, DroppedEdit, ValidationReport, Violation, ViolationKind};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EngineError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("cyclic substitution dependency among {0:?}")]
    CyclicDependency(Vec<UseCase>),
    #[error("rewrite is empty")]
    EmptyRewrite,
    #[error("sequence has {len} tokens, exhaustive search is bounded to {bound}")]
    SearchBoundExceeded { len: usize, bound: usize },
}
