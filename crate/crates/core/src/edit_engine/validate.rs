use std::fmt;

use serde::{Deserialize, Serialize};

use super::program::{EditProgram, Span, SpanRelation, Substitution, UseCase};
use super::sequence::TokenSequence;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum ViolationKind {
    EmptySpan { span: Span },
    SpanOutOfRange { span: Span },
    SpanContainsSep { span: Span },
    /// A substitution whose replacement and replaced spans intersect.
    SelfOverlap,
    DeletionOutOfRange { index: usize },
    /// A deletion index falls inside a substitution span (own or foreign).
    DeletionInsideSpan { index: usize },
    /// Two spans from different use cases overlap in a way other than the
    /// nesting of a replaced span inside a replacement span (or vice versa).
    PartialOverlap { first: Span, second: Span },
}

impl fmt::Display for ViolationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ViolationKind::EmptySpan { span } => write!(f, "empty span {span}"),
            ViolationKind::SpanOutOfRange { span } => write!(f, "span {span} out of range"),
            ViolationKind::SpanContainsSep { span } => write!(f, "span {span} contains the separator"),
            ViolationKind::SelfOverlap => f.write_str("replacement and replaced are not disjoint"),
            ViolationKind::DeletionOutOfRange { index } => write!(f, "deletion index {index} out of range"),
            ViolationKind::DeletionInsideSpan { index } => {
                write!(f, "deletion index {index} lies inside a substitution span")
            }
            ViolationKind::PartialOverlap { first, second } => {
                write!(f, "spans {first} and {second} partially overlap")
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub use_cases: Vec<UseCase>,
    pub kind: ViolationKind,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn offending_use_cases(&self) -> Vec<UseCase> {
        let mut out: Vec<UseCase> = self.violations.iter().flat_map(|v| v.use_cases.iter().copied()).collect();
        out.sort();
        out.dedup();
        out
    }
}

/// A use case whose edits were dropped before application.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DroppedEdit {
    pub use_case: UseCase,
    pub reasons: Vec<ViolationKind>,
}

/// Violations a single use case has on its own.
fn intrinsic_violations(seq_len: usize, sep: Option<usize>, program: &EditProgram, uc: UseCase) -> Vec<ViolationKind> {
    let edits = program.get(uc);
    let mut out = Vec::new();
    let mut spans_ok = true;
    if let Some(sub) = &edits.substitution {
        for span in [sub.replacement, sub.replaced] {
            if span.is_empty() {
                out.push(ViolationKind::EmptySpan { span });
                spans_ok = false;
            } else if span.end > seq_len {
                out.push(ViolationKind::SpanOutOfRange { span });
                spans_ok = false;
            } else if sep.is_some_and(|s| span.contains_index(s)) {
                out.push(ViolationKind::SpanContainsSep { span });
            }
        }
        if spans_ok && !sub.replacement.is_disjoint(&sub.replaced) {
            out.push(ViolationKind::SelfOverlap);
        }
    }
    for &index in &edits.deletions {
        if index >= seq_len {
            out.push(ViolationKind::DeletionOutOfRange { index });
        } else if let Some(sub) = &edits.substitution {
            if sub.replacement.contains_index(index) || sub.replaced.contains_index(index) {
                out.push(ViolationKind::DeletionInsideSpan { index });
            }
        }
    }
    out
}

/// Violations between two use cases, each assumed intrinsically valid.
fn pair_violations(program: &EditProgram, a: UseCase, b: UseCase) -> Vec<ViolationKind> {
    let mut out = Vec::new();
    let (ea, eb) = (program.get(a), program.get(b));
    if let (Some(sa), Some(sb)) = (&ea.substitution, &eb.substitution) {
        out.extend(substitution_conflicts(sa, sb));
    }
    for (dels, other) in [(&ea.deletions, &eb.substitution), (&eb.deletions, &ea.substitution)] {
        if let Some(sub) = other {
            for &index in dels {
                if sub.replacement.contains_index(index) || sub.replaced.contains_index(index) {
                    out.push(ViolationKind::DeletionInsideSpan { index });
                }
            }
        }
    }
    out
}

/// Two replacements, or two replaced spans, must be disjoint. A replacement
/// and a replaced span of different use cases may also nest in either
/// direction; every other overlap is rejected.
fn substitution_conflicts(a: &Substitution, b: &Substitution) -> Vec<ViolationKind> {
    let mut out = Vec::new();
    let must_be_disjoint = [(a.replacement, b.replacement), (a.replaced, b.replaced)];
    for (x, y) in must_be_disjoint {
        if !x.is_disjoint(&y) {
            out.push(ViolationKind::PartialOverlap { first: x, second: y });
        }
    }
    for (x, y) in [(a.replacement, b.replaced), (a.replaced, b.replacement)] {
        if x.relation(&y) == SpanRelation::PartialOverlap {
            out.push(ViolationKind::PartialOverlap { first: x, second: y });
        }
    }
    out
}

/// Checks a program against a sequence. Never fails; the report names the
/// use cases involved in every violation.
pub fn validate_program(seq: &TokenSequence, program: &EditProgram) -> ValidationReport {
    let (len, sep) = (seq.len(), seq.sep_index());
    let mut violations = Vec::new();
    let mut intrinsic_ok = [true; 5];
    for uc in UseCase::ALL {
        for kind in intrinsic_violations(len, sep, program, uc) {
            intrinsic_ok[uc.index()] = false;
            violations.push(Violation {
                use_cases: vec![uc],
                kind,
            });
        }
    }
    for (i, &a) in UseCase::ALL.iter().enumerate() {
        for &b in &UseCase::ALL[i + 1..] {
            if !(intrinsic_ok[a.index()] && intrinsic_ok[b.index()]) {
                continue;
            }
            for kind in pair_violations(program, a, b) {
                violations.push(Violation {
                    use_cases: vec![a, b],
                    kind,
                });
            }
        }
    }
    ValidationReport { violations }
}

/// Drops invalid use cases so the rest can still be applied.
///
/// Use cases with intrinsic violations go first. The survivors are then
/// admitted greedily in canonical order; a use case conflicting with one
/// already admitted is dropped.
pub fn sanitize(seq: &TokenSequence, program: &EditProgram) -> (EditProgram, Vec<DroppedEdit>) {
    let (len, sep) = (seq.len(), seq.sep_index());
    let mut kept = program.clone();
    let mut dropped = Vec::new();
    let mut admitted: Vec<UseCase> = Vec::new();
    for uc in UseCase::ALL {
        if program.get(uc).is_empty() {
            continue;
        }
        let mut reasons = intrinsic_violations(len, sep, program, uc);
        if reasons.is_empty() {
            for &other in &admitted {
                reasons.extend(pair_violations(program, other, uc));
            }
        }
        if reasons.is_empty() {
            admitted.push(uc);
        } else {
            kept.clear(uc);
            dropped.push(DroppedEdit { use_case: uc, reasons });
        }
    }
    (kept, dropped)
}
