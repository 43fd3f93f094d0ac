//! Exhaustive search for an edit program that produces a given rewrite.
//! Used as a test oracle for generated labels.

use std::collections::{BTreeSet, HashSet};

use super::apply::{apply_program, substituted_chain};
use super::program::{EditProgram, Span, Substitution, UseCase};
use super::sequence::{Segment, TokenCell, TokenSequence};
use super::validate::validate_program;
use super::EngineError;

/// Longest sequence the exhaustive search accepts.
pub const SEARCH_BOUND: usize = 24;

/// Searches for a program over `active` use cases whose application yields
/// `target`. Programs with up to two substitutions (one per use case) and
/// any deletion set are considered. Returns `Ok(None)` when no such program
/// exists.
pub fn derive_program_bruteforce<S: AsRef<str>>(
    seq: &TokenSequence,
    target: &[S],
    active: &[UseCase],
) -> Result<Option<EditProgram>, EngineError> {
    if seq.len() > SEARCH_BOUND {
        return Err(EngineError::SearchBoundExceeded {
            len: seq.len(),
            bound: SEARCH_BOUND,
        });
    }
    let target: Vec<&str> = target.iter().map(AsRef::as_ref).collect();
    let vocab: HashSet<&str> = seq.cells().iter().filter(|c| c.segment != Segment::Sep).map(|c| c.text.as_str()).collect();
    if target.is_empty() || target.iter().any(|t| !vocab.contains(t)) {
        return Ok(None);
    }
    let mut active: Vec<UseCase> = active.to_vec();
    active.sort();
    active.dedup();

    if let Some(p) = try_with(seq, &target, &active, &[])? {
        return Ok(Some(p));
    }
    let target_set: HashSet<&str> = target.iter().copied().collect();
    let candidates = candidate_substitutions(seq, &target_set);
    if !active.is_empty() {
        for &(rep, repd) in &candidates {
            if let Some(p) = try_with(seq, &target, &active, &[(rep, repd)])? {
                return Ok(Some(p));
            }
        }
    }
    if active.len() >= 2 {
        for (i, &a) in candidates.iter().enumerate() {
            for (j, &b) in candidates.iter().enumerate() {
                if i == j {
                    continue;
                }
                if let Some(p) = try_with(seq, &target, &active, &[a, b])? {
                    return Ok(Some(p));
                }
            }
        }
    }
    Ok(None)
}

/// Intrinsically valid (replacement, replaced) pairs whose replacement
/// tokens all occur in the target.
fn candidate_substitutions(seq: &TokenSequence, target: &HashSet<&str>) -> Vec<(Span, Span)> {
    let n = seq.len();
    let sep = seq.sep_index();
    let spans: Vec<Span> = (0..n)
        .flat_map(|s| (s + 1..=n).map(move |e| Span::new(s, e)))
        .filter(|sp| !sep.is_some_and(|x| sp.contains_index(x)))
        .collect();
    let cells = seq.cells();
    let mut out = Vec::new();
    for rep in &spans {
        if !rep.indices().all(|i| target.contains(cells[i].text.as_str())) {
            continue;
        }
        for repd in &spans {
            if rep.is_disjoint(repd) {
                out.push((*rep, *repd));
            }
        }
    }
    out
}

fn try_with(
    seq: &TokenSequence,
    target: &[&str],
    active: &[UseCase],
    subs: &[(Span, Span)],
) -> Result<Option<EditProgram>, EngineError> {
    let mut program = EditProgram::empty();
    for (&(rep, repd), &uc) in subs.iter().zip(active) {
        program.set_substitution(uc, rep, repd);
    }
    if !validate_program(seq, &program).is_valid() {
        return Ok(None);
    }
    let chain = match substituted_chain(seq, &program) {
        Ok(c) => c,
        Err(EngineError::CyclicDependency(_)) => return Ok(None),
        Err(e) => return Err(e),
    };
    let protected: BTreeSet<usize> = program
        .substitutions()
        .flat_map(|s: &Substitution| s.replacement.indices().chain(s.replaced.indices()))
        .collect();
    let Some(deletions) = match_with_deletions(&chain, target, &protected) else {
        return Ok(None);
    };
    if !deletions.is_empty() {
        let Some(&holder) = active.first() else {
            return Ok(None);
        };
        program.get_mut(holder).deletions.extend(deletions);
    }
    let result = apply_program(seq, &program)?;
    debug_assert!(result.dropped.is_empty());
    Ok((result.tokens == target).then_some(program))
}

/// Finds deletion ids that turn `chain` into `target` under the extraction
/// rule, never deleting a protected cell.
fn match_with_deletions(chain: &[TokenCell], target: &[&str], protected: &BTreeSet<usize>) -> Option<Vec<usize>> {
    // Separator deleted (or absent): the whole chain is the output.
    let whole = subsequence_deletions(chain, target, protected);
    // Separator kept: only the part after it is the output.
    let after_sep = chain
        .iter()
        .position(|c| c.segment == Segment::Sep)
        .and_then(|pos| subsequence_deletions(&chain[pos + 1..], target, protected));
    match (whole, after_sep) {
        (Some(a), Some(b)) => Some(if b.len() < a.len() { b } else { a }),
        (a, b) => a.or(b),
    }
}

/// Deletion set making `cells` read exactly `target`. Cells that cannot
/// match (including the separator) must be deletable.
fn subsequence_deletions(cells: &[TokenCell], target: &[&str], protected: &BTreeSet<usize>) -> Option<Vec<usize>> {
    let (n, m) = (cells.len(), target.len());
    // ok[i][j]: cells[i..] can produce target[j..]
    let mut ok = vec![vec![false; m + 1]; n + 1];
    ok[n][m] = true;
    for i in (0..n).rev() {
        let deletable = !protected.contains(&cells[i].id);
        for j in (0..=m).rev() {
            let keep = j < m && cells[i].segment != Segment::Sep && cells[i].text == target[j] && ok[i + 1][j + 1];
            let drop = deletable && ok[i + 1][j];
            ok[i][j] = keep || drop;
        }
    }
    if !ok[0][0] {
        return None;
    }
    let mut dels = Vec::new();
    let mut j = 0;
    for i in 0..n {
        let keep = j < m && cells[i].segment != Segment::Sep && cells[i].text == target[j] && ok[i + 1][j + 1];
        if keep {
            j += 1;
        } else {
            dels.push(cells[i].id);
        }
    }
    Some(dels)
}
