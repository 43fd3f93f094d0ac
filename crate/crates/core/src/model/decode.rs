use crate::edit_engine::{validate_program, EditProgram, Span, TokenSequence, UseCase};

use super::loss::{ForwardOutput, TAG_B, TAG_I, TAG_O};

/// Read access to per-token head distributions, so decoding can run on a
/// full [`ForwardOutput`] or on lazily computed batch outputs.
pub trait HeadOutputs {
    fn len(&self) -> usize;
    fn rd(&self, u: usize, i: usize) -> [f64; 3];
    fn del(&self, u: usize, i: usize) -> [f64; 2];
    /// Index of the highest-probability target in pointer row `i`.
    fn rr_argmax(&self, u: usize, i: usize) -> usize;
}

pub(crate) fn argmax(xs: impl IntoIterator<Item = f64>) -> usize {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, x) in xs.into_iter().enumerate() {
        if x > best.1 {
            best = (i, x);
        }
    }
    best.0
}

impl HeadOutputs for ForwardOutput {
    fn len(&self) -> usize {
        self.h.rows
    }

    fn rd(&self, u: usize, i: usize) -> [f64; 3] {
        self.rd[u][i]
    }

    fn del(&self, u: usize, i: usize) -> [f64; 2] {
        self.del[u][i]
    }

    fn rr_argmax(&self, u: usize, i: usize) -> usize {
        argmax(self.rr[u].row(i).iter().copied())
    }
}

/// Replacement span chosen from the BIO rows of one use case.
///
/// An I that does not continue a B/I run is read as O. Among several
/// runs the one with the highest mean tag probability wins (first on ties).
pub fn best_run<H: HeadOutputs + ?Sized>(out: &H, u: usize) -> Option<Span> {
    let mut best: Option<(Span, f64)> = None;
    let mut open: Option<(usize, f64)> = None;
    let close = |start: usize, end: usize, sum: f64, best: &mut Option<(Span, f64)>| {
        let mean = sum / (end - start) as f64;
        if best.is_none_or(|(_, m)| mean > m) {
            *best = Some((Span::new(start, end), mean));
        }
    };
    for i in 0..out.len() {
        let p = out.rd(u, i);
        let tag = argmax(p) as u8;
        match (tag, open) {
            (TAG_B, _) => {
                if let Some((s, sum)) = open {
                    close(s, i, sum, &mut best);
                }
                open = Some((i, p[TAG_B as usize]));
            }
            (TAG_I, Some((s, sum))) => open = Some((s, sum + p[TAG_I as usize])),
            _ => {
                debug_assert!(tag == TAG_O || tag == TAG_I);
                if let Some((s, sum)) = open.take() {
                    close(s, i, sum, &mut best);
                }
            }
        }
    }
    if let Some((s, sum)) = open {
        close(s, out.len(), sum, &mut best);
    }
    best.map(|(s, _)| s)
}

/// Turns head outputs into a valid edit program. Never fails.
///
/// Per use case: the best BIO run is the replacement, the pointer argmax at
/// its first and last token gives the replaced span, and tokens with
/// delete probability above 0.5 are deleted. Use cases are then admitted in
/// canonical order; an edit set that would make the program invalid is
/// weakened (first its deletions inside substitution spans go, then the
/// substitution, then everything) until it fits.
pub fn decode<H: HeadOutputs + ?Sized>(out: &H, seq: &TokenSequence) -> EditProgram {
    debug_assert_eq!(out.len(), seq.len());
    let mut program = EditProgram::empty();
    for uc in UseCase::ALL {
        let u = uc.index();
        let deletions: Vec<usize> = (0..out.len()).filter(|&i| out.del(u, i)[1] > 0.5).collect();
        let substitution = best_run(out, u).and_then(|rep| {
            let start = out.rr_argmax(u, rep.start);
            let end = out.rr_argmax(u, rep.end - 1);
            (start <= end).then(|| (rep, Span::new(start, end + 1)))
        });
        let admitted: Vec<Span> = program
            .substitutions()
            .flat_map(|s| [s.replacement, s.replaced])
            .collect();
        let outside = |extra: &[Span]| -> Vec<usize> {
            deletions
                .iter()
                .copied()
                .filter(|&i| !admitted.iter().chain(extra).any(|s| s.contains_index(i)))
                .collect()
        };
        let mut candidates = Vec::with_capacity(4);
        if let Some((rep, tgt)) = substitution {
            let with_sub = EditProgram::empty().with_substitution(uc, rep, tgt);
            candidates.push(with_sub.clone().with_deletions(uc, deletions.iter().copied()));
            candidates.push(with_sub.with_deletions(uc, outside(&[rep, tgt])));
        }
        candidates.push(EditProgram::empty().with_deletions(uc, deletions.iter().copied()));
        candidates.push(EditProgram::empty().with_deletions(uc, outside(&[])));
        for cand in candidates {
            let edits = cand.get(uc).clone();
            if edits.is_empty() {
                continue;
            }
            let mut trial = program.clone();
            *trial.get_mut(uc) = edits;
            if validate_program(seq, &trial).is_valid() {
                program = trial;
                break;
            }
        }
    }
    program
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::tensor::Mat;

    fn onehot_rd(tags: &[u8]) -> Vec<[f64; 3]> {
        tags.iter()
            .map(|&t| {
                let mut r = [0.05; 3];
                r[t as usize] = 0.9;
                r
            })
            .collect()
    }

    #[test]
    fn all_o_means_no_substitution() {
        let seq = TokenSequence::from_text("a b", "c d").unwrap();
        let out = ForwardOutput::uniform(5, 2);
        let mut o = out.clone();
        for u in 0..5 {
            o.rd[u] = onehot_rd(&[2; 5]);
        }
        assert!(decode(&o, &seq).is_empty());
        // Uniform rows: argmax picks B everywhere, runs are single tokens,
        // pointers all pick index 0; whatever survives must be valid.
        let p = decode(&out, &seq);
        assert!(validate_program(&seq, &p).is_valid());
    }

    #[test]
    fn canonical_decode() {
        let seq = TokenSequence::from_text("x y", "a b c").unwrap();
        let mut o = ForwardOutput::uniform(6, 2);
        for u in 0..5 {
            o.rd[u] = onehot_rd(&[2; 6]);
        }
        let r = UseCase::Repair.index();
        o.rd[r] = onehot_rd(&[2, 2, 2, 0, 1, 2]);
        o.rr[r] = Mat::from_fn(6, 6, |i, j| match i {
            3 => if j == 0 { 0.9 } else { 0.02 },
            4 => if j == 1 { 0.9 } else { 0.02 },
            _ => 1.0 / 6.0,
        });
        o.del[r][2] = [0.1, 0.9];
        let p = decode(&o, &seq);
        let expected = EditProgram::empty()
            .with_substitution(UseCase::Repair, Span::new(3, 5), Span::new(0, 2))
            .with_deletions(UseCase::Repair, [2]);
        assert_eq!(p, expected);
    }

    #[test]
    fn stray_inside_tag_is_outside() {
        let mut o = ForwardOutput::uniform(4, 2);
        o.rd[0] = onehot_rd(&[1, 2, 0, 1]);
        assert_eq!(best_run(&o, 0), Some(Span::new(2, 4)));
        o.rd[0] = onehot_rd(&[1, 1, 2, 2]);
        assert_eq!(best_run(&o, 0), None);
    }

    #[test]
    fn highest_mean_run_wins() {
        let mut o = ForwardOutput::uniform(5, 2);
        o.rd[0] = vec![[0.6, 0.2, 0.2], [0.2, 0.6, 0.2], [0.1, 0.1, 0.8], [0.9, 0.05, 0.05], [0.1, 0.1, 0.8]];
        assert_eq!(best_run(&o, 0), Some(Span::new(3, 4)));
    }

    #[test]
    fn reversed_pointers_drop_substitution_but_keep_deletions() {
        let seq = TokenSequence::from_text("x y", "a b c").unwrap();
        let mut o = ForwardOutput::uniform(6, 2);
        for u in 0..5 {
            o.rd[u] = onehot_rd(&[2; 6]);
        }
        let r = UseCase::Repair.index();
        o.rd[r] = onehot_rd(&[2, 2, 2, 0, 1, 2]);
        o.rr[r] = Mat::from_fn(6, 6, |i, j| match i {
            3 => if j == 1 { 0.9 } else { 0.02 },
            4 => if j == 0 { 0.9 } else { 0.02 },
            _ => 1.0 / 6.0,
        });
        o.del[r][2] = [0.1, 0.9];
        let p = decode(&o, &seq);
        assert_eq!(p, EditProgram::empty().with_deletions(UseCase::Repair, [2]));
    }

    #[test]
    fn pointer_into_own_replacement_is_dropped() {
        let seq = TokenSequence::from_text("x y", "a b c").unwrap();
        let mut o = ForwardOutput::uniform(6, 2);
        for u in 0..5 {
            o.rd[u] = onehot_rd(&[2; 6]);
        }
        o.rd[1] = onehot_rd(&[2, 2, 2, 0, 1, 2]);
        o.rr[1] = Mat::from_fn(6, 6, |_, j| if j == 4 { 0.9 } else { 0.02 });
        assert!(decode(&o, &seq).is_empty());
    }
}
