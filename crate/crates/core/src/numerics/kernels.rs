//! Raw slice kernels shared by the plain tensor API and the recorded graph.

/// `c = op(a) · op(b) + beta · c` where `op(a)` is `[m, k]` and `op(b)` is
/// `[k, n]`. A transposed operand is stored in its untransposed row-major
/// layout (`[k, m]` for `a`, `[n, k]` for `b`).
#[allow(clippy::too_many_arguments)]
pub(crate) fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    trans_a: bool,
    b: &[f64],
    trans_b: bool,
    c: &mut [f64],
    beta: f64,
) {
    assert_eq!(a.len(), m * k);
    assert_eq!(b.len(), k * n);
    assert_eq!(c.len(), m * n);
    if m == 0 || n == 0 {
        return;
    }
    let (rsa, csa) = if trans_a { (1, m as isize) } else { (k as isize, 1) };
    let (rsb, csb) = if trans_b { (1, k as isize) } else { (n as isize, 1) };
    // SAFETY: the asserts above bound every index matrixmultiply touches
    // given these strides, and `c` does not alias `a` or `b`.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa,
            csa,
            b.as_ptr(),
            rsb,
            csb,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

/// Iteration geometry for reducing along one axis of a row-major tensor.
#[derive(Clone, Copy, Debug)]
pub(crate) struct Lanes {
    pub outer: usize,
    pub len: usize,
    pub inner: usize,
}

impl Lanes {
    pub fn new(shape: &[usize], axis: usize) -> Self {
        Self {
            outer: shape[..axis].iter().product(),
            len: shape[axis],
            inner: shape[axis + 1..].iter().product(),
        }
    }

    /// Calls `f` with the flat indices of each lane.
    pub fn for_each(&self, mut f: impl FnMut(&mut dyn Iterator<Item = usize>)) {
        for o in 0..self.outer {
            for i in 0..self.inner {
                let base = o * self.len * self.inner + i;
                let stride = self.inner;
                let mut it = (0..self.len).map(move |j| base + j * stride);
                f(&mut it);
            }
        }
    }
}

/// Numerically stable softmax of one contiguous lane, written into `out`.
pub(crate) fn softmax_slice(x: &[f64], out: &mut [f64]) {
    let max = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for (o, &v) in out.iter_mut().zip(x) {
        *o = (v - max).exp();
        sum += *o;
    }
    let inv = 1.0 / sum;
    for o in out.iter_mut() {
        *o *= inv;
    }
}

pub(crate) fn softmax_axis(shape: &[usize], x: &[f64], axis: usize) -> Vec<f64> {
    let lanes = Lanes::new(shape, axis);
    let mut out = vec![0.0; x.len()];
    let mut xs = Vec::with_capacity(lanes.len);
    let mut ys = vec![0.0; lanes.len];
    lanes.for_each(|idx| {
        let idx: Vec<usize> = idx.collect();
        xs.clear();
        xs.extend(idx.iter().map(|&i| x[i]));
        softmax_slice(&xs, &mut ys);
        for (&i, &y) in idx.iter().zip(&ys) {
            out[i] = y;
        }
    });
    out
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^x)` without overflow for large `|x|`.
pub(crate) fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

pub(crate) fn silu(x: f64) -> f64 {
    x * sigmoid(x)
}

/// Derivative of `silu` at `x`.
pub(crate) fn silu_grad(x: f64) -> f64 {
    let s = sigmoid(x);
    s * (1.0 + x * (1.0 - s))
}
