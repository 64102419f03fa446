//! Dense K-dimensional tensor reductions: marginal sums and helpers shared by
//! the transport solvers.
//!
//! All tensors are row-major `ArrayD<f64>` in standard layout; hot loops work
//! on the flat slice with explicit strides so the axis reductions stay cheap.

use ndarray::{Array1, Array2, ArrayD};

/// Row-major strides for `shape`.
pub(crate) fn strides(shape: &[usize]) -> Vec<usize> {
    let mut s = vec![1; shape.len()];
    for i in (0..shape.len().saturating_sub(1)).rev() {
        s[i] = s[i + 1] * shape[i + 1];
    }
    s
}

fn flat_slice(t: &ArrayD<f64>) -> &[f64] {
    t.as_slice().expect("tensor must be in standard layout")
}

/// Marginal sum over all axes except `axis`.
pub fn marginal_sum(t: &ArrayD<f64>, axis: usize) -> Array1<f64> {
    let shape = t.shape();
    assert!(axis < shape.len(), "axis {axis} out of range");
    let st = strides(shape);
    let n = shape[axis];
    let mut out = vec![0.0; n];
    let (stride, len) = (st[axis], shape[axis]);
    for (flat, &v) in flat_slice(t).iter().enumerate() {
        out[(flat / stride) % len] += v;
    }
    Array1::from_vec(out)
}

/// Marginal sum over all axes except `j` and `k`; returns an `n_j x n_k` matrix.
pub fn pair_marginal(t: &ArrayD<f64>, j: usize, k: usize) -> Array2<f64> {
    let shape = t.shape();
    assert!(j != k, "pair_marginal needs distinct axes");
    assert!(j < shape.len() && k < shape.len(), "axis out of range");
    let st = strides(shape);
    let (nj, nk) = (shape[j], shape[k]);
    let mut out = Array2::zeros((nj, nk));
    let (sj, sk) = (st[j], st[k]);
    {
        let o = out.as_slice_mut().unwrap();
        for (flat, &v) in flat_slice(t).iter().enumerate() {
            let ij = (flat / sj) % nj;
            let ik = (flat / sk) % nk;
            o[ij * nk + ik] += v;
        }
    }
    out
}

/// Outer product of the given vectors as a dense tensor.
pub fn outer_product(factors: &[&Array1<f64>]) -> ArrayD<f64> {
    let shape: Vec<usize> = factors.iter().map(|f| f.len()).collect();
    let st = strides(&shape);
    let total: usize = shape.iter().product();
    let mut data = vec![1.0; total];
    for (flat, slot) in data.iter_mut().enumerate() {
        for (axis, f) in factors.iter().enumerate() {
            *slot *= f[(flat / st[axis]) % shape[axis]];
        }
    }
    ArrayD::from_shape_vec(shape, data).unwrap()
}

/// `log sum exp` of `t` over all axes except `axis`.
///
/// Entries of `-inf` are treated as zero mass; an all-`-inf` slice yields `-inf`.
pub fn logsumexp_marginal(t: &ArrayD<f64>, axis: usize) -> Array1<f64> {
    let shape = t.shape();
    let st = strides(shape);
    let n = shape[axis];
    let (stride, len) = (st[axis], shape[axis]);
    let data = flat_slice(t);
    let mut max = vec![f64::NEG_INFINITY; n];
    for (flat, &v) in data.iter().enumerate() {
        let i = (flat / stride) % len;
        if v > max[i] {
            max[i] = v;
        }
    }
    let mut sum = vec![0.0; n];
    for (flat, &v) in data.iter().enumerate() {
        let i = (flat / stride) % len;
        if max[i].is_finite() {
            sum[i] += (v - max[i]).exp();
        }
    }
    Array1::from_iter((0..n).map(|i| {
        if max[i].is_finite() {
            max[i] + sum[i].ln()
        } else {
            f64::NEG_INFINITY
        }
    }))
}

/// Add `delta[i]` to every entry whose `axis` index is `i`, in place.
pub fn add_along_axis(t: &mut ArrayD<f64>, axis: usize, delta: &Array1<f64>) {
    let shape = t.shape().to_vec();
    let st = strides(&shape);
    let (stride, len) = (st[axis], shape[axis]);
    let data = t.as_slice_mut().expect("tensor must be in standard layout");
    for (flat, v) in data.iter_mut().enumerate() {
        *v += delta[(flat / stride) % len];
    }
}

/// Multiply every entry whose `axis` index is `i` by `factors[i]`, in place.
pub fn scale_along_axis(t: &mut ArrayD<f64>, axis: usize, factors: &Array1<f64>) {
    let shape = t.shape().to_vec();
    let st = strides(&shape);
    let (stride, len) = (st[axis], shape[axis]);
    let data = t.as_slice_mut().expect("tensor must be in standard layout");
    for (flat, v) in data.iter_mut().enumerate() {
        *v *= factors[(flat / stride) % len];
    }
}

/// Inner product `<a, b>`.
pub fn dot(a: &ArrayD<f64>, b: &ArrayD<f64>) -> f64 {
    debug_assert_eq!(a.shape(), b.shape());
    flat_slice(a)
        .iter()
        .zip(flat_slice(b))
        .map(|(x, y)| x * y)
        .sum()
}

/// L1 distance between two tensors of identical shape.
pub fn l1_diff(a: &ArrayD<f64>, b: &ArrayD<f64>) -> f64 {
    debug_assert_eq!(a.shape(), b.shape());
    flat_slice(a)
        .iter()
        .zip(flat_slice(b))
        .map(|(x, y)| (x - y).abs())
        .sum()
}

/// Visit every multi-index of `shape` in lexicographic order.
pub fn for_each_index(shape: &[usize], mut f: impl FnMut(&[usize])) {
    let total: usize = shape.iter().product();
    if total == 0 {
        return;
    }
    let mut idx = vec![0usize; shape.len()];
    for _ in 0..total {
        f(&idx);
        for axis in (0..shape.len()).rev() {
            idx[axis] += 1;
            if idx[axis] < shape[axis] {
                break;
            }
            idx[axis] = 0;
        }
    }
}
