use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::{AddAssign, MulAssign, SubAssign};

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating point type the network runs in. Training uses `f32`; gradient
/// checks use `f64`.
pub trait Real:
    Float + FromPrimitive + ToPrimitive + Default + Debug + Display + Send + Sync + 'static + AddAssign + SubAssign + MulAssign + Sum
{
    /// Raw GEMM: `c = alpha * a · b + beta * c` with `a` m×k, `b` k×n and
    /// explicit row/column strides.
    ///
    /// # Safety
    /// All strided accesses must stay inside the allocations.
    #[allow(clippy::too_many_arguments)]
    unsafe fn gemm_raw(
        m: usize,
        k: usize,
        n: usize,
        alpha: Self,
        a: *const Self,
        rsa: isize,
        csa: isize,
        b: *const Self,
        rsb: isize,
        csb: isize,
        beta: Self,
        c: *mut Self,
        rsc: isize,
        csc: isize,
    );
}

impl Real for f32 {
    unsafe fn gemm_raw(
        m: usize,
        k: usize,
        n: usize,
        alpha: f32,
        a: *const f32,
        rsa: isize,
        csa: isize,
        b: *const f32,
        rsb: isize,
        csb: isize,
        beta: f32,
        c: *mut f32,
        rsc: isize,
        csc: isize,
    ) {
        matrixmultiply::sgemm(m, k, n, alpha, a, rsa, csa, b, rsb, csb, beta, c, rsc, csc)
    }
}

impl Real for f64 {
    unsafe fn gemm_raw(
        m: usize,
        k: usize,
        n: usize,
        alpha: f64,
        a: *const f64,
        rsa: isize,
        csa: isize,
        b: *const f64,
        rsb: isize,
        csb: isize,
        beta: f64,
        c: *mut f64,
        rsc: isize,
        csc: isize,
    ) {
        matrixmultiply::dgemm(m, k, n, alpha, a, rsa, csa, b, rsb, csb, beta, c, rsc, csc)
    }
}

#[inline]
pub fn lit<F: Real>(x: f64) -> F {
    F::from_f64(x).expect("representable constant")
}

/// Row-major dense matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Mat<F> {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<F>,
}

impl<F: Real> Mat<F> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat {
            rows,
            cols,
            data: vec![F::zero(); rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<F>) -> Self {
        assert_eq!(data.len(), rows * cols, "shape {rows}x{cols}");
        Mat { rows, cols, data }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> F) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Mat { rows, cols, data }
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn row(&self, r: usize) -> &[F] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [F] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn at(&self, r: usize, c: usize) -> F {
        self.data[r * self.cols + c]
    }

    pub fn fill_zero(&mut self) {
        self.data.iter_mut().for_each(|x| *x = F::zero());
    }

    pub fn cast<G: Real>(&self) -> Mat<G> {
        Mat {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|x| lit(x.to_f64().expect("finite"))).collect(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }
}

fn check(len: usize, rows: usize, cols: usize, rs: usize, cs: usize, what: &str) {
    if rows > 0 && cols > 0 {
        let last = (rows - 1) * rs + (cols - 1) * cs;
        assert!(last < len, "{what}: {rows}x{cols} view out of bounds ({last} >= {len})");
    }
}

/// Strided read-only operand.
#[derive(Clone, Copy)]
pub struct View<'a, F> {
    data: &'a [F],
    rs: usize,
    cs: usize,
}

/// Row-major `rows`×`cols` block starting at the beginning of `data`.
pub fn nn<F>(data: &[F], cols: usize) -> View<'_, F> {
    View { data, rs: cols, cs: 1 }
}

/// Transpose of a row-major block with `cols` columns.
pub fn tr<F>(data: &[F], cols: usize) -> View<'_, F> {
    View { data, rs: 1, cs: cols }
}

/// `c[m×n] = alpha * a[m×k] · b[k×n] + beta * c`, `c` row-major with `n`
/// columns.
#[allow(clippy::too_many_arguments)]
pub fn gemm<F: Real>(m: usize, k: usize, n: usize, alpha: F, a: View<F>, b: View<F>, beta: F, c: &mut [F]) {
    if m == 0 || n == 0 {
        return;
    }
    check(a.data.len(), m, k, a.rs, a.cs, "lhs");
    check(b.data.len(), k, n, b.rs, b.cs, "rhs");
    check(c.len(), m, n, n, 1, "out");
    if k == 0 {
        if beta == F::zero() {
            c[..m * n].iter_mut().for_each(|x| *x = F::zero());
        } else {
            c[..m * n].iter_mut().for_each(|x| *x *= beta);
        }
        return;
    }
    // SAFETY: bounds of all three views were checked above.
    unsafe {
        F::gemm_raw(
            m,
            k,
            n,
            alpha,
            a.data.as_ptr(),
            a.rs as isize,
            a.cs as isize,
            b.data.as_ptr(),
            b.rs as isize,
            b.cs as isize,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        )
    }
}

/// `out[m×n] (+)= x[m×k] · wᵀ` for a weight `w` stored as n×k.
pub fn linear<F: Real>(x: &[F], m: usize, w: &Mat<F>, accumulate: bool, out: &mut [F]) {
    let beta = if accumulate { F::one() } else { F::zero() };
    gemm(m, w.cols, w.rows, F::one(), nn(x, w.cols), tr(&w.data, w.cols), beta, out);
}

/// `dw[n×k] += dy[m×n]ᵀ · x[m×k]`.
pub fn acc_weight_grad<F: Real>(dy: &[F], x: &[F], m: usize, dw: &mut Mat<F>) {
    let (n, k) = (dw.rows, dw.cols);
    gemm(n, m, k, F::one(), tr(dy, n), nn(x, k), F::one(), &mut dw.data);
}

/// `dx[m×k] (+)= dy[m×n] · w[n×k]`.
pub fn back_linear<F: Real>(dy: &[F], m: usize, w: &Mat<F>, accumulate: bool, dx: &mut [F]) {
    let beta = if accumulate { F::one() } else { F::zero() };
    gemm(m, w.rows, w.cols, F::one(), nn(dy, w.rows), nn(&w.data, w.cols), beta, dx);
}

pub fn add_row_bias<F: Real>(out: &mut [F], cols: usize, bias: &[F]) {
    for row in out.chunks_exact_mut(cols) {
        for (o, b) in row.iter_mut().zip(bias) {
            *o += *b;
        }
    }
}

pub fn acc_col_sums<F: Real>(dy: &[F], cols: usize, db: &mut [F]) {
    for row in dy.chunks_exact(cols) {
        for (d, g) in db.iter_mut().zip(row) {
            *d += *g;
        }
    }
}

#[inline]
pub fn sigmoid<F: Real>(x: F) -> F {
    F::one() / (F::one() + (-x).exp())
}

/// Numerically stable softmax in place.
pub fn softmax_in_place<F: Real>(x: &mut [F]) {
    let max = x.iter().copied().fold(F::neg_infinity(), F::max);
    let mut sum = F::zero();
    for v in x.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in x.iter_mut() {
        *v = *v / sum;
    }
}

/// `-log softmax(x)[target]`, stable.
pub fn cross_entropy_logits<F: Real>(x: &[F], target: usize) -> F {
    let max = x.iter().copied().fold(F::neg_infinity(), F::max);
    let lse = x.iter().map(|&v| (v - max).exp()).sum::<F>().ln() + max;
    lse - x[target]
}

pub fn dot<F: Real>(a: &[F], b: &[F]) -> F {
    a.iter().zip(b).map(|(x, y)| *x * *y).sum()
}
