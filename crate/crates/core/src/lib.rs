//! Composable edit-operation query rewriting for multi-turn conversational
//! queries.
//!
//! * [`edit_engine`] applies per-use-case substitutions and deletions.
//! * [`datagen`] synthesizes labeled data for five use cases and their
//!   compositions.
//! * [`model`] is a non-autoregressive BiLSTM tagger with replacement
//!   detection, biaffine replacement resolution and deletion heads.
//! * [`eval`] scores rewrites, runs composition sweeps and latency benchmarks.

pub mod datagen;
pub mod edit_engine;
pub mod eval;
pub mod model;

pub use edit_engine::{EditProgram, EngineError, Span, TokenSequence, UseCase};
