use rand::Rng;

use crate::edit_engine::UseCase;

use super::config::{ModelConfig, NUM_USE_CASES};
use super::tensor::{lit, Mat, Real};
use super::vocab::PAD;

#[derive(Clone, Debug, PartialEq)]
pub struct LstmParams<F> {
    /// Input weights, 4h×e, gate blocks in order i, f, g, o.
    pub w_x: Mat<F>,
    /// Recurrent weights, 4h×h.
    pub w_h: Mat<F>,
    pub bias: Mat<F>,
}

/// The three edit predictors of one use case.
#[derive(Clone, Debug, PartialEq)]
pub struct HeadParams<F> {
    pub rd_w: Mat<F>,
    pub rd_b: Mat<F>,
    pub del_w: Mat<F>,
    pub del_b: Mat<F>,
    pub q_w: Mat<F>,
    pub q_b: Mat<F>,
    pub k_w: Mat<F>,
    pub k_b: Mat<F>,
    /// Biaffine score: `qᵀ W k + src·q + tgt·k + c`.
    pub bilinear: Mat<F>,
    pub src_bias: Mat<F>,
    pub tgt_bias: Mat<F>,
    pub scalar: Mat<F>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Params<F> {
    pub embedding: Mat<F>,
    pub fwd: LstmParams<F>,
    pub bwd: LstmParams<F>,
    pub heads: Vec<HeadParams<F>>,
}

impl<F: Real> LstmParams<F> {
    fn zeros(e: usize, h: usize) -> Self {
        LstmParams {
            w_x: Mat::zeros(4 * h, e),
            w_h: Mat::zeros(4 * h, h),
            bias: Mat::zeros(1, 4 * h),
        }
    }
}

impl<F: Real> HeadParams<F> {
    fn zeros(d: usize, p: usize) -> Self {
        HeadParams {
            rd_w: Mat::zeros(3, d),
            rd_b: Mat::zeros(1, 3),
            del_w: Mat::zeros(2, d),
            del_b: Mat::zeros(1, 2),
            q_w: Mat::zeros(p, d),
            q_b: Mat::zeros(1, p),
            k_w: Mat::zeros(p, d),
            k_b: Mat::zeros(1, p),
            bilinear: Mat::zeros(p, p),
            src_bias: Mat::zeros(1, p),
            tgt_bias: Mat::zeros(1, p),
            scalar: Mat::zeros(1, 1),
        }
    }

    fn tensors(&self) -> [(&'static str, &Mat<F>); 12] {
        [
            ("rd_w", &self.rd_w),
            ("rd_b", &self.rd_b),
            ("del_w", &self.del_w),
            ("del_b", &self.del_b),
            ("q_w", &self.q_w),
            ("q_b", &self.q_b),
            ("k_w", &self.k_w),
            ("k_b", &self.k_b),
            ("bilinear", &self.bilinear),
            ("src_bias", &self.src_bias),
            ("tgt_bias", &self.tgt_bias),
            ("scalar", &self.scalar),
        ]
    }

    fn tensors_mut(&mut self) -> [(&'static str, &mut Mat<F>); 12] {
        [
            ("rd_w", &mut self.rd_w),
            ("rd_b", &mut self.rd_b),
            ("del_w", &mut self.del_w),
            ("del_b", &mut self.del_b),
            ("q_w", &mut self.q_w),
            ("q_b", &mut self.q_b),
            ("k_w", &mut self.k_w),
            ("k_b", &mut self.k_b),
            ("bilinear", &mut self.bilinear),
            ("src_bias", &mut self.src_bias),
            ("tgt_bias", &mut self.tgt_bias),
            ("scalar", &mut self.scalar),
        ]
    }
}

fn uniform<F: Real, R: Rng>(m: &mut Mat<F>, limit: f64, rng: &mut R) {
    for x in &mut m.data {
        *x = lit(rng.gen_range(-limit..limit));
    }
}

fn xavier<F: Real, R: Rng>(m: &mut Mat<F>, rng: &mut R) {
    let limit = (6.0 / (m.rows + m.cols) as f64).sqrt();
    uniform(m, limit, rng);
}

impl<F: Real> Params<F> {
    pub fn zeros(config: &ModelConfig, vocab_size: usize) -> Self {
        let (e, h, p, d) = (config.embed_dim, config.hidden_dim, config.proj_dim, config.state_dim());
        Params {
            embedding: Mat::zeros(vocab_size, e),
            fwd: LstmParams::zeros(e, h),
            bwd: LstmParams::zeros(e, h),
            heads: (0..NUM_USE_CASES).map(|_| HeadParams::zeros(d, p)).collect(),
        }
    }

    /// Random initialization: uniform ±0.1 embeddings (PAD row zero),
    /// uniform ±1/√h LSTM weights with forget-gate bias 1, Xavier heads,
    /// zero biases.
    pub fn init<R: Rng>(config: &ModelConfig, vocab_size: usize, rng: &mut R) -> Self {
        let mut p = Self::zeros(config, vocab_size);
        uniform(&mut p.embedding, 0.1, rng);
        p.embedding.row_mut(PAD as usize).iter_mut().for_each(|x| *x = F::zero());
        let h = config.hidden_dim;
        let limit = 1.0 / (h as f64).sqrt();
        for l in [&mut p.fwd, &mut p.bwd] {
            uniform(&mut l.w_x, limit, rng);
            uniform(&mut l.w_h, limit, rng);
            l.bias.data[h..2 * h].iter_mut().for_each(|x| *x = F::one());
        }
        for hd in &mut p.heads {
            for w in [&mut hd.rd_w, &mut hd.del_w, &mut hd.q_w, &mut hd.k_w, &mut hd.bilinear] {
                xavier(w, rng);
            }
        }
        p
    }

    pub fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        for (_, t) in z.tensors_mut() {
            t.fill_zero();
        }
        z
    }

    /// Every tensor with its stable name, in checkpoint order.
    pub fn tensors(&self) -> Vec<(String, &Mat<F>)> {
        let mut out = vec![("embedding".to_owned(), &self.embedding)];
        for (dir, l) in [("fwd", &self.fwd), ("bwd", &self.bwd)] {
            out.push((format!("lstm.{dir}.w_x"), &l.w_x));
            out.push((format!("lstm.{dir}.w_h"), &l.w_h));
            out.push((format!("lstm.{dir}.bias"), &l.bias));
        }
        for (uc, hd) in UseCase::ALL.iter().zip(&self.heads) {
            for (n, t) in hd.tensors() {
                out.push((format!("head.{uc}.{n}"), t));
            }
        }
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<(String, &mut Mat<F>)> {
        let mut out = vec![("embedding".to_owned(), &mut self.embedding)];
        for (dir, l) in [("fwd", &mut self.fwd), ("bwd", &mut self.bwd)] {
            out.push((format!("lstm.{dir}.w_x"), &mut l.w_x));
            out.push((format!("lstm.{dir}.w_h"), &mut l.w_h));
            out.push((format!("lstm.{dir}.bias"), &mut l.bias));
        }
        for (uc, hd) in UseCase::ALL.iter().zip(&mut self.heads) {
            for (n, t) in hd.tensors_mut() {
                out.push((format!("head.{uc}.{n}"), t));
            }
        }
        out
    }

    pub fn num_params(&self) -> usize {
        self.tensors().iter().map(|(_, t)| t.data.len()).sum()
    }

    pub fn cast<G: Real>(&self) -> Params<G> {
        let cast_l = |l: &LstmParams<F>| LstmParams {
            w_x: l.w_x.cast(),
            w_h: l.w_h.cast(),
            bias: l.bias.cast(),
        };
        Params {
            embedding: self.embedding.cast(),
            fwd: cast_l(&self.fwd),
            bwd: cast_l(&self.bwd),
            heads: self
                .heads
                .iter()
                .map(|h| HeadParams {
                    rd_w: h.rd_w.cast(),
                    rd_b: h.rd_b.cast(),
                    del_w: h.del_w.cast(),
                    del_b: h.del_b.cast(),
                    q_w: h.q_w.cast(),
                    q_b: h.q_b.cast(),
                    k_w: h.k_w.cast(),
                    k_b: h.k_b.cast(),
                    bilinear: h.bilinear.cast(),
                    src_bias: h.src_bias.cast(),
                    tgt_bias: h.tgt_bias.cast(),
                    scalar: h.scalar.cast(),
                })
                .collect(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|(_, t)| t.is_finite())
    }
}
