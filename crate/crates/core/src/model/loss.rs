use serde::{Deserialize, Serialize};

use crate::edit_engine::{EditProgram, UseCase};

use super::config::NUM_USE_CASES;
use super::tensor::Mat;
use super::ModelError;

pub const TAG_B: u8 = 0;
pub const TAG_I: u8 = 1;
pub const TAG_O: u8 = 2;
pub const KEEP: u8 = 0;
pub const DELETE: u8 = 1;

/// Pointer supervision for one use case: the row at the replacement start
/// points at the replaced start, the row at the replacement's last token
/// points at the replaced span's last token.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PointerLabel {
    pub start_query: usize,
    pub start_target: usize,
    pub end_query: usize,
    pub end_target: usize,
}

/// Supervision targets of one example, derived from its gold program.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LabelTensors {
    pub len: usize,
    /// BIO tags, one row per use case.
    pub rd: Vec<Vec<u8>>,
    /// Present iff the use case has a replacement.
    pub rr: Vec<Option<PointerLabel>>,
    /// Keep/delete, one row per use case.
    pub del: Vec<Vec<u8>>,
}

impl LabelTensors {
    pub fn from_program(program: &EditProgram, len: usize) -> Result<Self, ModelError> {
        let mut rd = vec![vec![TAG_O; len]; NUM_USE_CASES];
        let mut del = vec![vec![KEEP; len]; NUM_USE_CASES];
        let mut rr = vec![None; NUM_USE_CASES];
        for uc in UseCase::ALL {
            let edits = program.get(uc);
            let u = uc.index();
            for &i in &edits.deletions {
                if i >= len {
                    return Err(ModelError::Label(format!("{uc}: deletion {i} out of range")));
                }
                del[u][i] = DELETE;
            }
            if let Some(s) = edits.substitution {
                if s.replacement.is_empty() || s.replaced.is_empty() || s.replacement.end > len || s.replaced.end > len {
                    return Err(ModelError::Label(format!("{uc}: span out of range")));
                }
                for i in s.replacement.indices() {
                    rd[u][i] = if i == s.replacement.start { TAG_B } else { TAG_I };
                }
                rr[u] = Some(PointerLabel {
                    start_query: s.replacement.start,
                    start_target: s.replaced.start,
                    end_query: s.replacement.end - 1,
                    end_target: s.replaced.end - 1,
                });
            }
        }
        Ok(LabelTensors { len, rd, rr, del })
    }
}

/// Per-token distributions of all heads for one input of length T.
#[derive(Clone, Debug, PartialEq)]
pub struct ForwardOutput {
    /// Encoder states, T×2h.
    pub h: Mat<f64>,
    /// `rd[u][i]` over (B, I, O).
    pub rd: Vec<Vec<[f64; 3]>>,
    /// `rr[u]` is T×T; row i is where token i points.
    pub rr: Vec<Mat<f64>>,
    /// `del[u][i]` over (keep, delete).
    pub del: Vec<Vec<[f64; 2]>>,
}

impl ForwardOutput {
    pub fn len(&self) -> usize {
        self.h.rows
    }

    pub fn is_empty(&self) -> bool {
        self.h.rows == 0
    }

    /// All distributions uniform, as produced by an all-zero network.
    pub fn uniform(len: usize, state_dim: usize) -> Self {
        ForwardOutput {
            h: Mat::zeros(len, state_dim),
            rd: vec![vec![[1.0 / 3.0; 3]; len]; NUM_USE_CASES],
            rr: (0..NUM_USE_CASES)
                .map(|_| Mat::from_vec(len, len, vec![1.0 / len as f64; len * len]))
                .collect(),
            del: vec![vec![[0.5; 2]; len]; NUM_USE_CASES],
        }
    }

    /// Largest deviation of any distribution row from summing to one.
    pub fn max_normalization_error(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for u in 0..NUM_USE_CASES {
            for r in &self.rd[u] {
                worst = worst.max((r.iter().sum::<f64>() - 1.0).abs());
            }
            for r in &self.del[u] {
                worst = worst.max((r.iter().sum::<f64>() - 1.0).abs());
            }
            for i in 0..self.rr[u].rows {
                worst = worst.max((self.rr[u].row(i).iter().sum::<f64>() - 1.0).abs());
            }
        }
        worst
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub rd: f64,
    pub rr: f64,
    pub del: f64,
    pub total: f64,
}

impl LossBreakdown {
    pub fn new(rd: f64, rr: f64, del: f64) -> Self {
        LossBreakdown {
            rd,
            rr,
            del,
            total: rd + rr + del,
        }
    }
}

/// Replacement detection and deletion losses are averaged over use cases
/// and summed over positions; the pointer loss is summed over use cases
/// with a gold replacement, two boundary rows each.
pub fn compute_loss(out: &ForwardOutput, labels: &LabelTensors) -> Result<LossBreakdown, ModelError> {
    let t = out.len();
    if labels.len != t || labels.rd.len() != NUM_USE_CASES || labels.del.len() != NUM_USE_CASES {
        return Err(ModelError::Label("label shape does not match output".into()));
    }
    let u_count = NUM_USE_CASES as f64;
    let (mut rd, mut rr, mut del) = (0.0, 0.0, 0.0);
    for u in 0..NUM_USE_CASES {
        for i in 0..t {
            let y = labels.rd[u][i] as usize;
            let d = labels.del[u][i] as usize;
            if y > 2 || d > 1 {
                return Err(ModelError::Label(format!("class index out of range at {i}")));
            }
            rd -= out.rd[u][i][y].ln();
            del -= out.del[u][i][d].ln();
        }
        if let Some(p) = labels.rr[u] {
            for (q, target) in [(p.start_query, p.start_target), (p.end_query, p.end_target)] {
                if q >= t || target >= t {
                    return Err(ModelError::Label(format!("pointer index out of range ({q}, {target})")));
                }
                rr -= out.rr[u].at(q, target).ln();
            }
        }
    }
    Ok(LossBreakdown::new(rd / u_count, rr, del / u_count))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::edit_engine::Span;

    #[test]
    fn labels_from_running_example() {
        let p = EditProgram::empty()
            .with_substitution(UseCase::Entity, Span::new(2, 4), Span::new(9, 10))
            .with_substitution(UseCase::Repair, Span::new(9, 12), Span::new(2, 6))
            .with_deletions(UseCase::Repair, [6, 7, 8]);
        let l = LabelTensors::from_program(&p, 12).unwrap();
        let e = UseCase::Entity.index();
        let r = UseCase::Repair.index();
        assert_eq!(l.rd[e], vec![2, 2, 0, 1, 2, 2, 2, 2, 2, 2, 2, 2]);
        assert_eq!(l.rd[r], vec![2, 2, 2, 2, 2, 2, 2, 2, 2, 0, 1, 1]);
        assert_eq!(
            l.rr[e],
            Some(PointerLabel { start_query: 2, start_target: 9, end_query: 3, end_target: 9 })
        );
        assert_eq!(
            l.rr[r],
            Some(PointerLabel { start_query: 9, start_target: 2, end_query: 11, end_target: 5 })
        );
        assert_eq!(l.del[r], vec![0, 0, 0, 0, 0, 0, 1, 1, 1, 0, 0, 0]);
        assert!(l.rr[UseCase::Intent.index()].is_none());
        assert!(LabelTensors::from_program(&p, 10).is_err());
    }

    #[test]
    fn uniform_losses() {
        let t = 7;
        let p = EditProgram::empty()
            .with_substitution(UseCase::Repair, Span::new(4, 6), Span::new(0, 2))
            .with_deletions(UseCase::Repair, [3]);
        let l = LabelTensors::from_program(&p, t).unwrap();
        let loss = compute_loss(&ForwardOutput::uniform(t, 4), &l).unwrap();
        assert!((loss.rd - t as f64 * 3f64.ln()).abs() < 1e-12);
        assert!((loss.del - t as f64 * 2f64.ln()).abs() < 1e-12);
        assert!((loss.rr - 2.0 * (t as f64).ln()).abs() < 1e-12);
        assert_eq!(loss.total, loss.rd + loss.rr + loss.del);
    }

    #[test]
    fn perfect_predictions_have_zero_loss() {
        let t = 4;
        let p = EditProgram::empty().with_substitution(UseCase::Intent, Span::new(3, 4), Span::new(0, 1));
        let l = LabelTensors::from_program(&p, t).unwrap();
        let mut out = ForwardOutput::uniform(t, 2);
        for u in 0..5 {
            for i in 0..t {
                out.rd[u][i] = [0.0; 3];
                out.rd[u][i][l.rd[u][i] as usize] = 1.0;
                out.del[u][i] = [0.0; 2];
                out.del[u][i][l.del[u][i] as usize] = 1.0;
            }
        }
        let rr = &mut out.rr[0];
        rr.row_mut(3).iter_mut().enumerate().for_each(|(j, x)| *x = if j == 0 { 1.0 } else { 0.0 });
        let loss = compute_loss(&out, &l).unwrap();
        assert_eq!(loss.total, 0.0);
    }

    #[test]
    fn gating_ignores_pointer_rows_without_replacement() {
        let t = 5;
        let l = LabelTensors::from_program(&EditProgram::empty().with_deletions(UseCase::Steering, [2]), t).unwrap();
        let base = compute_loss(&ForwardOutput::uniform(t, 2), &l).unwrap();
        let mut out = ForwardOutput::uniform(t, 2);
        out.rr[UseCase::Steering.index()] = Mat::from_fn(t, t, |i, j| if i == j { 1.0 } else { 0.0 });
        assert_eq!(compute_loss(&out, &l).unwrap(), base);
        assert_eq!(base.rr, 0.0);
    }
}
