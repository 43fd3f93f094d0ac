use serde::{Deserialize, Serialize};

use super::order::build_dependency_order;
use super::program::{EditProgram, Span, Substitution, UseCase};
use super::sequence::{join_tokens, Segment, TokenCell, TokenSequence};
use super::validate::{sanitize, DroppedEdit};
use super::EngineError;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RewriteResult {
    pub tokens: Vec<String>,
    /// Linearization of the cell chain after each substitution step. Cells
    /// flagged for deletion are still shown; only excised cells are gone.
    pub trace: Vec<String>,
    pub applied_order: Vec<UseCase>,
    /// Use cases whose edits failed validation and were skipped.
    pub dropped: Vec<DroppedEdit>,
}

impl RewriteResult {
    pub fn text(&self) -> String {
        join_tokens(&self.tokens)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Role {
    Replacement,
    Replaced,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Item {
    Cell(usize),
    Open(usize, Role),
    Close(usize, Role),
}

/// The cell chain with boundary markers for every pending substitution.
struct Chain {
    cells: Vec<TokenCell>,
    items: Vec<Item>,
}

impl Chain {
    fn new(seq: &TokenSequence, subs: &[Substitution]) -> Self {
        let n = seq.len();
        let mut spans: Vec<(Span, usize, Role)> = Vec::with_capacity(subs.len() * 2);
        for (k, s) in subs.iter().enumerate() {
            spans.push((s.replacement, k, Role::Replacement));
            spans.push((s.replaced, k, Role::Replaced));
        }
        // A replacement may coincide with a replaced span of another use
        // case; the replacement is then the outer region.
        let inner_rank = |r: Role| match r {
            Role::Replaced => 0,
            Role::Replacement => 1,
        };
        let mut items = Vec::with_capacity(n + spans.len() * 2);
        for p in 0..=n {
            let mut closing: Vec<_> = spans.iter().filter(|(s, _, _)| s.end == p).collect();
            closing.sort_by_key(|(s, _, r)| (std::cmp::Reverse(s.start), inner_rank(*r)));
            items.extend(closing.iter().map(|&&(_, k, r)| Item::Close(k, r)));
            let mut opening: Vec<_> = spans.iter().filter(|(s, _, _)| s.start == p).collect();
            opening.sort_by_key(|(s, _, r)| (std::cmp::Reverse(s.end), std::cmp::Reverse(inner_rank(*r))));
            items.extend(opening.iter().map(|&&(_, k, r)| Item::Open(k, r)));
            if p < n {
                items.push(Item::Cell(p));
            }
        }
        Chain {
            cells: seq.cells().to_vec(),
            items,
        }
    }

    fn find(&self, item: Item) -> usize {
        self.items
            .iter()
            .position(|&i| i == item)
            .expect("marker installed for every substitution")
    }

    /// Excises the replaced region of substitution `k` and splices the
    /// current content of its replacement region in its place.
    fn substitute(&mut self, k: usize) {
        let open = self.find(Item::Open(k, Role::Replacement));
        let close = self.find(Item::Close(k, Role::Replacement));
        let moved: Vec<Item> = self.items[open + 1..close].to_vec();
        let mut out = Vec::with_capacity(self.items.len());
        let mut excising = false;
        for (idx, &item) in self.items.iter().enumerate() {
            if (open..=close).contains(&idx) {
                continue;
            }
            match item {
                Item::Open(j, Role::Replaced) if j == k => {
                    out.extend_from_slice(&moved);
                    excising = true;
                }
                Item::Close(j, Role::Replaced) if j == k => excising = false,
                _ if excising => {}
                _ => out.push(item),
            }
        }
        self.items = out;
    }

    fn mark_deleted(&mut self, ids: impl IntoIterator<Item = usize>) {
        for id in ids {
            self.cells[id].deleted = true;
        }
    }

    /// Cells currently in the chain, in order.
    fn current(&self) -> Vec<TokenCell> {
        self.items
            .iter()
            .filter_map(|i| match i {
                Item::Cell(id) => Some(self.cells[*id].clone()),
                _ => None,
            })
            .collect()
    }

    fn linearize(&self) -> String {
        let texts: Vec<&str> = self
            .items
            .iter()
            .filter_map(|i| match i {
                Item::Cell(id) => Some(self.cells[*id].text.as_str()),
                _ => None,
            })
            .collect();
        join_tokens(&texts)
    }
}

/// Applies a program: deletion flags, dependency-ordered substitutions,
/// then rewrite extraction.
///
/// Invalid use cases are dropped (listed in `RewriteResult::dropped`) and
/// the remaining edits are still applied.
pub fn apply_program(seq: &TokenSequence, program: &EditProgram) -> Result<RewriteResult, EngineError> {
    apply_with_deletion_stage(seq, program, 0)
}

/// Same as [`apply_program`], but the deletion flags are set after
/// `stage` substitution steps instead of before the first one.
pub fn apply_with_deletion_stage(
    seq: &TokenSequence,
    program: &EditProgram,
    stage: usize,
) -> Result<RewriteResult, EngineError> {
    let (program, dropped) = sanitize(seq, program);
    let order = build_dependency_order(&program)?;
    let mut chain = Chain::new(seq, &order);
    let deletions = program.all_deletions();
    let mut trace = Vec::with_capacity(order.len());
    let stage = stage.min(order.len());
    for k in 0..order.len() {
        if k == stage {
            chain.mark_deleted(deletions.iter().copied());
        }
        chain.substitute(k);
        trace.push(chain.linearize());
    }
    if stage == order.len() {
        chain.mark_deleted(deletions.iter().copied());
    }
    let tokens = extract_rewrite(&chain.current())?;
    Ok(RewriteResult {
        tokens,
        trace,
        applied_order: order.iter().map(|s| s.use_case).collect(),
        dropped,
    })
}

/// Cell chain after all substitutions of an already validated program,
/// without deletion flags.
pub(crate) fn substituted_chain(seq: &TokenSequence, program: &EditProgram) -> Result<Vec<TokenCell>, EngineError> {
    let order = build_dependency_order(program)?;
    let mut chain = Chain::new(seq, &order);
    for k in 0..order.len() {
        chain.substitute(k);
    }
    Ok(chain.current())
}

/// Reads the rewrite off a final cell chain: deleted cells are skipped,
/// and if a separator survives only the cells after the last one are kept.
pub fn extract_rewrite(cells: &[TokenCell]) -> Result<Vec<String>, EngineError> {
    let live: Vec<&TokenCell> = cells.iter().filter(|c| !c.deleted).collect();
    let start = live
        .iter()
        .rposition(|c| c.segment == Segment::Sep)
        .map_or(0, |i| i + 1);
    let tokens: Vec<String> = live[start..].iter().map(|c| c.text.clone()).collect();
    if tokens.is_empty() {
        return Err(EngineError::EmptyRewrite);
    }
    Ok(tokens)
}
