use std::cell::Cell;
use std::cmp::Reverse;

use rand::Rng;

use super::config::{EmbeddingMode, ModelConfig, NUM_USE_CASES};
use super::loss::{ForwardOutput, LabelTensors, LossBreakdown};
use super::params::{LstmParams, Params};
use super::tensor::{
    acc_col_sums, acc_weight_grad, add_row_bias, back_linear, cross_entropy_logits, dot, gemm, lit, linear, nn,
    sigmoid, softmax_in_place, tr, Mat, Real,
};
use super::ModelError;

thread_local! {
    static ENCODER_PASSES: Cell<u64> = const { Cell::new(0) };
    static HEAD_PASSES: Cell<u64> = const { Cell::new(0) };
}

/// Encoder passes run on this thread so far. A batched call counts once.
pub fn encoder_passes() -> u64 {
    ENCODER_PASSES.with(Cell::get)
}

/// Head passes run on this thread so far. A batched call counts once.
pub fn head_passes() -> u64 {
    HEAD_PASSES.with(Cell::get)
}

fn bump(c: &'static std::thread::LocalKey<Cell<u64>>) {
    c.with(|c| c.set(c.get() + 1));
}

/// One training example: token ids and targets.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Sample {
    pub ids: Vec<u32>,
    pub labels: LabelTensors,
}

/// Time-major layout of a batch sorted by decreasing length. Step `t`
/// holds the `counts[t]` sequences longer than `t` in rows
/// `offsets[t]..offsets[t] + counts[t]`.
#[derive(Clone, Debug)]
pub(crate) struct Packed {
    pub lens: Vec<usize>,
    pub counts: Vec<usize>,
    pub offsets: Vec<usize>,
}

impl Packed {
    pub fn new(lens: &[usize]) -> Self {
        debug_assert!(lens.windows(2).all(|w| w[0] >= w[1]));
        let steps = lens.first().copied().unwrap_or(0);
        let counts: Vec<usize> = (0..steps).map(|t| lens.iter().filter(|&&l| l > t).count()).collect();
        let mut offsets = vec![0; steps + 1];
        for t in 0..steps {
            offsets[t + 1] = offsets[t] + counts[t];
        }
        Packed {
            lens: lens.to_vec(),
            counts,
            offsets,
        }
    }

    pub fn steps(&self) -> usize {
        self.counts.len()
    }

    pub fn total(&self) -> usize {
        *self.offsets.last().unwrap_or(&0)
    }

    pub fn row(&self, b: usize, t: usize) -> usize {
        debug_assert!(t < self.lens[b]);
        self.offsets[t] + b
    }

    /// Step feeding step `t` and the number of its rows that carry state
    /// into `t` (a prefix of both steps).
    fn prev(&self, t: usize, reverse: bool) -> Option<(usize, usize)> {
        let p = if reverse {
            (t + 1 < self.steps()).then_some(t + 1)
        } else {
            t.checked_sub(1)
        }?;
        Some((p, self.counts[p].min(self.counts[t])))
    }
}

struct DirState<F> {
    /// Gate activations i, f, g, o per row.
    gates: Vec<F>,
    c: Vec<F>,
    tc: Vec<F>,
    h: Vec<F>,
}

pub(crate) struct EncoderState<F> {
    pub packed: Packed,
    ids: Vec<u32>,
    x: Vec<F>,
    dirs: [DirState<F>; 2],
    mask: Option<Vec<F>>,
    /// Encoder output after dropout, total×2h.
    pub out: Vec<F>,
}

fn run_direction<F: Real>(lp: &LstmParams<F>, h: usize, packed: &Packed, x: &[F], reverse: bool) -> DirState<F> {
    let n = packed.total();
    let g4 = 4 * h;
    let mut gates = vec![F::zero(); n * g4];
    linear(x, n, &lp.w_x, false, &mut gates);
    add_row_bias(&mut gates, g4, &lp.bias.data);
    let mut c = vec![F::zero(); n * h];
    let mut tc = vec![F::zero(); n * h];
    let mut hh = vec![F::zero(); n * h];
    let steps: Vec<usize> = if reverse {
        (0..packed.steps()).rev().collect()
    } else {
        (0..packed.steps()).collect()
    };
    for t in steps {
        let (r0, cnt) = (packed.offsets[t], packed.counts[t]);
        let (pr0, n_prev) = match packed.prev(t, reverse) {
            Some((p, k)) => (packed.offsets[p], k),
            None => (0, 0),
        };
        if n_prev > 0 {
            linear(&hh[pr0 * h..(pr0 + n_prev) * h], n_prev, &lp.w_h, true, &mut gates[r0 * g4..(r0 + n_prev) * g4]);
        }
        for b in 0..cnt {
            let row = r0 + b;
            let gr = &mut gates[row * g4..(row + 1) * g4];
            for k in 0..h {
                let i = sigmoid(gr[k]);
                let f = sigmoid(gr[h + k]);
                let g = gr[2 * h + k].tanh();
                let o = sigmoid(gr[3 * h + k]);
                gr[k] = i;
                gr[h + k] = f;
                gr[2 * h + k] = g;
                gr[3 * h + k] = o;
                let c_prev = if b < n_prev { c[(pr0 + b) * h + k] } else { F::zero() };
                let cv = f * c_prev + i * g;
                let tcv = cv.tanh();
                c[row * h + k] = cv;
                tc[row * h + k] = tcv;
                hh[row * h + k] = o * tcv;
            }
        }
    }
    DirState { gates, c, tc, h: hh }
}

fn run_encoder<F: Real, R: Rng>(
    p: &Params<F>,
    cfg: &ModelConfig,
    packed: Packed,
    ids: Vec<u32>,
    dropout_rng: Option<&mut R>,
) -> EncoderState<F> {
    let (e, h) = (cfg.embed_dim, cfg.hidden_dim);
    let n = packed.total();
    let mut x = vec![F::zero(); n * e];
    for (row, &id) in ids.iter().enumerate() {
        x[row * e..(row + 1) * e].copy_from_slice(p.embedding.row(id as usize));
    }
    let fwd = run_direction(&p.fwd, h, &packed, &x, false);
    let bwd = run_direction(&p.bwd, h, &packed, &x, true);
    let d = 2 * h;
    let mut out = vec![F::zero(); n * d];
    for row in 0..n {
        out[row * d..row * d + h].copy_from_slice(&fwd.h[row * h..(row + 1) * h]);
        out[row * d + h..(row + 1) * d].copy_from_slice(&bwd.h[row * h..(row + 1) * h]);
    }
    let mask = match dropout_rng {
        Some(rng) if cfg.dropout > 0.0 => {
            let keep: F = lit(1.0 / (1.0 - cfg.dropout));
            let m: Vec<F> = (0..n * d)
                .map(|_| if rng.gen::<f64>() < cfg.dropout { F::zero() } else { keep })
                .collect();
            out.iter_mut().zip(&m).for_each(|(o, k)| *o *= *k);
            Some(m)
        }
        _ => None,
    };
    EncoderState {
        packed,
        ids,
        x,
        dirs: [fwd, bwd],
        mask,
        out,
    }
}

fn backward_direction<F: Real>(
    lp: &LstmParams<F>,
    st: &DirState<F>,
    packed: &Packed,
    x: &[F],
    mut dh: Vec<F>,
    g: &mut LstmParams<F>,
    dx: &mut [F],
    reverse: bool,
) {
    let h = lp.w_h.cols;
    let g4 = 4 * h;
    let n = packed.total();
    let mut dc = vec![F::zero(); n * h];
    let mut dgates = vec![F::zero(); n * g4];
    let one = F::one();
    // Reverse of the order the direction was computed in.
    let steps: Vec<usize> = if reverse {
        (0..packed.steps()).collect()
    } else {
        (0..packed.steps()).rev().collect()
    };
    for t in steps {
        let (r0, cnt) = (packed.offsets[t], packed.counts[t]);
        let (pr0, n_prev) = match packed.prev(t, reverse) {
            Some((p, k)) => (packed.offsets[p], k),
            None => (0, 0),
        };
        for b in 0..cnt {
            let row = r0 + b;
            let gr = &st.gates[row * g4..(row + 1) * g4];
            let dg = &mut dgates[row * g4..(row + 1) * g4];
            for k in 0..h {
                let (i, f, gg, o) = (gr[k], gr[h + k], gr[2 * h + k], gr[3 * h + k]);
                let tcv = st.tc[row * h + k];
                let dhv = dh[row * h + k];
                let dct = dc[row * h + k] + dhv * o * (one - tcv * tcv);
                let c_prev = if b < n_prev { st.c[(pr0 + b) * h + k] } else { F::zero() };
                dg[k] = dct * gg * i * (one - i);
                dg[h + k] = dct * c_prev * f * (one - f);
                dg[2 * h + k] = dct * i * (one - gg * gg);
                dg[3 * h + k] = dhv * tcv * o * (one - o);
                if b < n_prev {
                    dc[(pr0 + b) * h + k] += dct * f;
                }
            }
        }
        if n_prev > 0 {
            let dgs = &dgates[r0 * g4..(r0 + n_prev) * g4];
            back_linear(dgs, n_prev, &lp.w_h, true, &mut dh[pr0 * h..(pr0 + n_prev) * h]);
            acc_weight_grad(dgs, &st.h[pr0 * h..(pr0 + n_prev) * h], n_prev, &mut g.w_h);
        }
    }
    acc_weight_grad(&dgates, x, n, &mut g.w_x);
    acc_col_sums(&dgates, g4, &mut g.bias.data);
    back_linear(&dgates, n, &lp.w_x, true, dx);
}

fn run_encoder_backward<F: Real>(
    p: &Params<F>,
    cfg: &ModelConfig,
    enc: &EncoderState<F>,
    mut dout: Vec<F>,
    grads: &mut Params<F>,
) {
    if let Some(m) = &enc.mask {
        dout.iter_mut().zip(m).for_each(|(d, k)| *d *= *k);
    }
    let (e, h) = (cfg.embed_dim, cfg.hidden_dim);
    let n = enc.packed.total();
    let d = 2 * h;
    let mut dx = vec![F::zero(); n * e];
    for (dir, reverse) in [(0usize, false), (1usize, true)] {
        let mut dh = vec![F::zero(); n * h];
        for row in 0..n {
            dh[row * h..(row + 1) * h].copy_from_slice(&dout[row * d + dir * h..row * d + (dir + 1) * h]);
        }
        let (lp, g) = if reverse { (&p.bwd, &mut grads.bwd) } else { (&p.fwd, &mut grads.fwd) };
        backward_direction(lp, &enc.dirs[dir], &enc.packed, &enc.x, dh, g, &mut dx, reverse);
    }
    if cfg.embedding == EmbeddingMode::Trainable {
        for (row, &id) in enc.ids.iter().enumerate() {
            let dst = grads.embedding.row_mut(id as usize);
            for (a, b) in dst.iter_mut().zip(&dx[row * e..(row + 1) * e]) {
                *a += *b;
            }
        }
    }
}

/// Position-wise head weights of all use cases stacked into one matrix:
/// per use case 3 replacement-detection rows, 2 deletion rows and the key
/// projection.
fn fused_heads<F: Real>(p: &Params<F>, cfg: &ModelConfig) -> (Mat<F>, Vec<F>) {
    let (d, pd) = (cfg.state_dim(), cfg.proj_dim);
    let blk = 5 + pd;
    let mut w = Mat::zeros(NUM_USE_CASES * blk, d);
    let mut b = vec![F::zero(); NUM_USE_CASES * blk];
    for (u, hp) in p.heads.iter().enumerate() {
        let o = u * blk;
        w.data[o * d..(o + 3) * d].copy_from_slice(&hp.rd_w.data);
        w.data[(o + 3) * d..(o + 5) * d].copy_from_slice(&hp.del_w.data);
        w.data[(o + 5) * d..(o + blk) * d].copy_from_slice(&hp.k_w.data);
        b[o..o + 3].copy_from_slice(&hp.rd_b.data);
        b[o + 3..o + 5].copy_from_slice(&hp.del_b.data);
        b[o + 5..o + blk].copy_from_slice(&hp.k_b.data);
    }
    (w, b)
}

fn check_len(cfg: &ModelConfig, len: usize) -> Result<(), ModelError> {
    if len == 0 {
        return Err(ModelError::Length { len, max: cfg.max_len });
    }
    if len > cfg.max_len {
        return Err(ModelError::Length { len, max: cfg.max_len });
    }
    Ok(())
}

/// Encoder and position-wise head outputs for a batch.
pub(crate) struct BatchState<F> {
    pub enc: EncoderState<F>,
    /// Original index of the sequence in packed slot `b`.
    pub order: Vec<usize>,
    /// Position-wise logits, key slots already passed through tanh.
    pub logits: Vec<F>,
    pub width: usize,
}

pub(crate) fn run_batch<F: Real, R: Rng>(
    p: &Params<F>,
    cfg: &ModelConfig,
    seqs: &[&[u32]],
    dropout_rng: Option<&mut R>,
) -> Result<BatchState<F>, ModelError> {
    for s in seqs {
        check_len(cfg, s.len())?;
        if let Some(&bad) = s.iter().find(|&&id| id as usize >= p.embedding.rows) {
            return Err(ModelError::Config(format!("token id {bad} outside vocabulary")));
        }
    }
    let mut order: Vec<usize> = (0..seqs.len()).collect();
    order.sort_by_key(|&i| (Reverse(seqs[i].len()), i));
    let lens: Vec<usize> = order.iter().map(|&i| seqs[i].len()).collect();
    let packed = Packed::new(&lens);
    let mut ids = vec![0u32; packed.total()];
    for (b, &i) in order.iter().enumerate() {
        for (t, &id) in seqs[i].iter().enumerate() {
            ids[packed.row(b, t)] = id;
        }
    }
    bump(&ENCODER_PASSES);
    let enc = run_encoder(p, cfg, packed, ids, dropout_rng);
    bump(&HEAD_PASSES);
    let n = enc.packed.total();
    let (w, b) = fused_heads(p, cfg);
    let width = w.rows;
    let mut logits = vec![F::zero(); n * width];
    linear(&enc.out, n, &w, false, &mut logits);
    add_row_bias(&mut logits, width, &b);
    let blk = 5 + cfg.proj_dim;
    for row in logits.chunks_exact_mut(width) {
        for u in 0..NUM_USE_CASES {
            for x in &mut row[u * blk + 5..(u + 1) * blk] {
                *x = x.tanh();
            }
        }
    }
    Ok(BatchState { enc, order, logits, width })
}

impl<F: Real> BatchState<F> {
    /// Query projection and pointer logits of token `q` of packed slot `b`
    /// for use case `u`. Returns (query vector, `a = Wᵀq + tgt`, logits).
    pub fn pointer_logits(&self, p: &Params<F>, cfg: &ModelConfig, b: usize, u: usize, q: usize) -> (Vec<F>, Vec<F>, Vec<F>) {
        let (d, pd) = (cfg.state_dim(), cfg.proj_dim);
        let hp = &p.heads[u];
        let packed = &self.enc.packed;
        let rq = packed.row(b, q);
        let hq = &self.enc.out[rq * d..(rq + 1) * d];
        let qv: Vec<F> = (0..pd).map(|k| (dot(hp.q_w.row(k), hq) + hp.q_b.data[k]).tanh()).collect();
        let mut a = hp.tgt_bias.data.clone();
        for (r, &qr) in qv.iter().enumerate() {
            for (ac, wc) in a.iter_mut().zip(hp.bilinear.row(r)) {
                *ac += qr * *wc;
            }
        }
        let cst = dot(&hp.src_bias.data, &qv) + hp.scalar.data[0];
        let o = u * (5 + pd) + 5;
        let s = (0..packed.lens[b])
            .map(|j| {
                let rj = packed.row(b, j);
                dot(&a, &self.logits[rj * self.width + o..rj * self.width + o + pd]) + cst
            })
            .collect();
        (qv, a, s)
    }
}

/// Mean per-example loss of a batch and, if requested, its gradient.
///
/// Dropout is applied when `dropout_rng` is given; pass `None` for a
/// deterministic pass.
pub fn batch_loss_and_grad<F: Real, R: Rng>(
    p: &Params<F>,
    cfg: &ModelConfig,
    batch: &[&Sample],
    dropout_rng: Option<&mut R>,
    want_grads: bool,
) -> Result<(LossBreakdown, Option<Params<F>>), ModelError> {
    if batch.is_empty() {
        return Err(ModelError::EmptyBatch);
    }
    for s in batch {
        if s.labels.len != s.ids.len() {
            return Err(ModelError::Label("label length differs from input length".into()));
        }
    }
    let seqs: Vec<&[u32]> = batch.iter().map(|s| s.ids.as_slice()).collect();
    let st = run_batch(p, cfg, &seqs, dropout_rng)?;
    let packed = &st.enc.packed;
    let (d, pd) = (cfg.state_dim(), cfg.proj_dim);
    let blk = 5 + pd;
    let width = st.width;
    let n = packed.total();
    let bsz = batch.len();
    let scale: F = lit(1.0 / bsz as f64);
    let rd_scale: F = lit(1.0 / (bsz * NUM_USE_CASES) as f64);
    let one = F::one();

    let mut dlog = if want_grads { vec![F::zero(); n * width] } else { Vec::new() };
    let (mut l_rd, mut l_rr, mut l_del) = (0.0f64, 0.0f64, 0.0f64);
    for (b, &orig) in st.order.iter().enumerate() {
        let lab = &batch[orig].labels;
        for t in 0..packed.lens[b] {
            let row = packed.row(b, t);
            let lr = &st.logits[row * width..(row + 1) * width];
            for u in 0..NUM_USE_CASES {
                let o = u * blk;
                let (y, k) = (lab.rd[u][t] as usize, lab.del[u][t] as usize);
                if y > 2 || k > 1 {
                    return Err(ModelError::Label(format!("class index out of range at {t}")));
                }
                l_rd += cross_entropy_logits(&lr[o..o + 3], y).to_f64().unwrap_or(f64::NAN);
                l_del += cross_entropy_logits(&lr[o + 3..o + 5], k).to_f64().unwrap_or(f64::NAN);
                if want_grads {
                    let mut pr = [lr[o], lr[o + 1], lr[o + 2]];
                    softmax_in_place(&mut pr);
                    let mut pk = [lr[o + 3], lr[o + 4]];
                    softmax_in_place(&mut pk);
                    let dl = &mut dlog[row * width..(row + 1) * width];
                    for c in 0..3 {
                        let target = if c == y { one } else { F::zero() };
                        dl[o + c] = (pr[c] - target) * rd_scale;
                    }
                    for c in 0..2 {
                        let target = if c == k { one } else { F::zero() };
                        dl[o + 3 + c] = (pk[c] - target) * rd_scale;
                    }
                }
            }
        }
    }

    let mut grads = want_grads.then(|| p.zeros_like());
    let mut dout = if want_grads { vec![F::zero(); n * d] } else { Vec::new() };
    for (b, &orig) in st.order.iter().enumerate() {
        let lab = &batch[orig].labels;
        let len = packed.lens[b];
        for u in 0..NUM_USE_CASES {
            let Some(pl) = lab.rr[u] else { continue };
            for (q, target) in [(pl.start_query, pl.start_target), (pl.end_query, pl.end_target)] {
                if q >= len || target >= len {
                    return Err(ModelError::Label(format!("pointer index out of range ({q}, {target})")));
                }
                let (qv, a, mut s) = st.pointer_logits(p, cfg, b, u, q);
                l_rr += cross_entropy_logits(&s, target).to_f64().unwrap_or(f64::NAN);
                let Some(g) = grads.as_mut() else { continue };
                let hp = &p.heads[u];
                let gh = &mut g.heads[u];
                softmax_in_place(&mut s);
                s[target] -= one;
                let ds: Vec<F> = s.iter().map(|&v| v * scale).collect();
                let sum_ds: F = ds.iter().copied().sum();
                let o = u * blk + 5;
                let mut da = vec![F::zero(); pd];
                for (j, &dsj) in ds.iter().enumerate() {
                    let rj = packed.row(b, j);
                    let kj = &st.logits[rj * width + o..rj * width + o + pd];
                    let dkj = &mut dlog[rj * width + o..rj * width + o + pd];
                    for c in 0..pd {
                        da[c] += dsj * kj[c];
                        dkj[c] += dsj * a[c];
                    }
                }
                let mut dq = vec![F::zero(); pd];
                for r in 0..pd {
                    let wr = hp.bilinear.row(r);
                    let gr = gh.bilinear.row_mut(r);
                    for c in 0..pd {
                        gr[c] += qv[r] * da[c];
                        dq[r] += wr[c] * da[c];
                    }
                    dq[r] += hp.src_bias.data[r] * sum_ds;
                    gh.src_bias.data[r] += qv[r] * sum_ds;
                    gh.tgt_bias.data[r] += da[r];
                }
                gh.scalar.data[0] += sum_ds;
                let rq = packed.row(b, q);
                let hq = &st.enc.out[rq * d..(rq + 1) * d];
                let dh = &mut dout[rq * d..(rq + 1) * d];
                for k in 0..pd {
                    let dz = dq[k] * (one - qv[k] * qv[k]);
                    gh.q_b.data[k] += dz;
                    for (gw, &hv) in gh.q_w.row_mut(k).iter_mut().zip(hq) {
                        *gw += dz * hv;
                    }
                    for (dhv, &wv) in dh.iter_mut().zip(hp.q_w.row(k)) {
                        *dhv += dz * wv;
                    }
                }
            }
        }
    }

    let bs = bsz as f64;
    let loss = LossBreakdown::new(l_rd / NUM_USE_CASES as f64 / bs, l_rr / bs, l_del / NUM_USE_CASES as f64 / bs);
    if !loss.total.is_finite() {
        return Err(ModelError::Divergence(format!("non-finite loss {loss:?}")));
    }
    let Some(mut g) = grads else {
        return Ok((loss, None));
    };

    // Key slots: back through tanh.
    for (row_g, row_l) in dlog.chunks_exact_mut(width).zip(st.logits.chunks_exact(width)) {
        for u in 0..NUM_USE_CASES {
            for c in u * blk + 5..(u + 1) * blk {
                row_g[c] *= one - row_l[c] * row_l[c];
            }
        }
    }
    let (w, _) = fused_heads(p, cfg);
    let mut dw = Mat::zeros(w.rows, w.cols);
    let mut db = vec![F::zero(); w.rows];
    acc_weight_grad(&dlog, &st.enc.out, n, &mut dw);
    acc_col_sums(&dlog, width, &mut db);
    back_linear(&dlog, n, &w, true, &mut dout);
    for (u, gh) in g.heads.iter_mut().enumerate() {
        let o = u * blk;
        let add = |dst: &mut [F], src: &[F]| dst.iter_mut().zip(src).for_each(|(a, b)| *a += *b);
        add(&mut gh.rd_w.data, &dw.data[o * d..(o + 3) * d]);
        add(&mut gh.del_w.data, &dw.data[(o + 3) * d..(o + 5) * d]);
        add(&mut gh.k_w.data, &dw.data[(o + 5) * d..(o + blk) * d]);
        add(&mut gh.rd_b.data, &db[o..o + 3]);
        add(&mut gh.del_b.data, &db[o + 3..o + 5]);
        add(&mut gh.k_b.data, &db[o + 5..o + blk]);
    }
    run_encoder_backward(p, cfg, &st.enc, dout, &mut g);
    Ok((loss, Some(g)))
}

/// Exact gradient of the mean batch loss without dropout.
pub fn gradients<F: Real>(p: &Params<F>, cfg: &ModelConfig, batch: &[&Sample]) -> Result<(LossBreakdown, Params<F>), ModelError> {
    let (loss, g) = batch_loss_and_grad::<F, rand_chacha::ChaCha8Rng>(p, cfg, batch, None, true)?;
    Ok((loss, g.expect("requested")))
}

/// Mean batch loss without dropout.
pub fn batch_loss<F: Real>(p: &Params<F>, cfg: &ModelConfig, batch: &[&Sample]) -> Result<LossBreakdown, ModelError> {
    Ok(batch_loss_and_grad::<F, rand_chacha::ChaCha8Rng>(p, cfg, batch, None, false)?.0)
}

/// Encoder states of one sequence (eval mode), T×2h.
pub fn encode<F: Real>(p: &Params<F>, cfg: &ModelConfig, ids: &[u32]) -> Result<Mat<F>, ModelError> {
    check_len(cfg, ids.len())?;
    if let Some(&bad) = ids.iter().find(|&&id| id as usize >= p.embedding.rows) {
        return Err(ModelError::Config(format!("token id {bad} outside vocabulary")));
    }
    bump(&ENCODER_PASSES);
    let enc = run_encoder::<F, rand_chacha::ChaCha8Rng>(p, cfg, Packed::new(&[ids.len()]), ids.to_vec(), None);
    Ok(Mat::from_vec(ids.len(), cfg.state_dim(), enc.out))
}

/// All head distributions for encoder states `h`.
pub fn heads_forward<F: Real>(p: &Params<F>, cfg: &ModelConfig, h: &Mat<F>) -> ForwardOutput {
    bump(&HEAD_PASSES);
    let (t, pd) = (h.rows, cfg.proj_dim);
    let to64 = |x: F| x.to_f64().unwrap_or(f64::NAN);
    let mut out = ForwardOutput {
        h: h.cast(),
        rd: Vec::with_capacity(NUM_USE_CASES),
        rr: Vec::with_capacity(NUM_USE_CASES),
        del: Vec::with_capacity(NUM_USE_CASES),
    };
    for hp in &p.heads {
        let mut rd = vec![F::zero(); t * 3];
        linear(&h.data, t, &hp.rd_w, false, &mut rd);
        add_row_bias(&mut rd, 3, &hp.rd_b.data);
        let mut del = vec![F::zero(); t * 2];
        linear(&h.data, t, &hp.del_w, false, &mut del);
        add_row_bias(&mut del, 2, &hp.del_b.data);
        let mut q = vec![F::zero(); t * pd];
        linear(&h.data, t, &hp.q_w, false, &mut q);
        add_row_bias(&mut q, pd, &hp.q_b.data);
        let mut k = vec![F::zero(); t * pd];
        linear(&h.data, t, &hp.k_w, false, &mut k);
        add_row_bias(&mut k, pd, &hp.k_b.data);
        q.iter_mut().chain(k.iter_mut()).for_each(|x| *x = x.tanh());
        let mut qw = vec![F::zero(); t * pd];
        gemm(t, pd, pd, F::one(), nn(&q, pd), nn(&hp.bilinear.data, pd), F::zero(), &mut qw);
        let mut s = vec![F::zero(); t * t];
        gemm(t, pd, t, F::one(), nn(&qw, pd), tr(&k, pd), F::zero(), &mut s);
        for i in 0..t {
            let si = dot(&hp.src_bias.data, &q[i * pd..(i + 1) * pd]) + hp.scalar.data[0];
            for j in 0..t {
                s[i * t + j] += si + dot(&hp.tgt_bias.data, &k[j * pd..(j + 1) * pd]);
            }
            softmax_in_place(&mut s[i * t..(i + 1) * t]);
        }
        out.rd.push(
            rd.chunks_exact_mut(3)
                .map(|r| {
                    softmax_in_place(r);
                    [to64(r[0]), to64(r[1]), to64(r[2])]
                })
                .collect(),
        );
        out.del.push(
            del.chunks_exact_mut(2)
                .map(|r| {
                    softmax_in_place(r);
                    [to64(r[0]), to64(r[1])]
                })
                .collect(),
        );
        out.rr.push(Mat::from_vec(t, t, s.into_iter().map(to64).collect()));
    }
    out
}

/// One encoder pass and one head pass.
pub fn forward<F: Real>(p: &Params<F>, cfg: &ModelConfig, ids: &[u32]) -> Result<ForwardOutput, ModelError> {
    let h = encode(p, cfg, ids)?;
    Ok(heads_forward(p, cfg, &h))
}
