//! Minimal dense symmetric linear algebra on flat row-major storage.
//!
//! The likelihood search factorizes one Gram matrix per objective evaluation,
//! so the factorization works in place on reusable buffers instead of going
//! through heap-allocating matrix types. Inner loops run on slices to let the
//! compiler elide bounds checks and vectorize the dot products.

// Multi-accumulator dot product: independent partial sums unlock SIMD and
// instruction-level parallelism that a strict left-to-right reduction forbids.
#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0f64; 8];
    let mut ca = a.chunks_exact(8);
    let mut cb = b.chunks_exact(8);
    for (xa, xb) in (&mut ca).zip(&mut cb) {
        for k in 0..8 {
            acc[k] += xa[k] * xb[k];
        }
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]) + ((acc[4] + acc[5]) + (acc[6] + acc[7]));
    for (xa, xb) in ca.remainder().iter().zip(cb.remainder()) {
        s += xa * xb;
    }
    s
}

/// In-place lower Cholesky on an `n x n` row-major buffer; only the lower
/// triangle of `a` is read, and on success it holds `L` with `A = L L^T`.
/// Returns `false` on a non-positive pivot.
pub(crate) fn cholesky_in_place(a: &mut [f64], n: usize) -> bool {
    debug_assert_eq!(a.len(), n * n);
    for i in 0..n {
        let (head, row_i) = a.split_at_mut(i * n);
        let row_i = &mut row_i[..=i];
        for j in 0..i {
            let row_j = &head[j * n..j * n + j];
            let s = row_i[j] - dot(&row_i[..j], row_j);
            row_i[j] = s / head[j * n + j];
        }
        let s = row_i[i] - dot(&row_i[..i], &row_i[..i]);
        if !(s > 0.0) || !s.is_finite() {
            return false;
        }
        row_i[i] = s.sqrt();
    }
    true
}

/// Solves `L w = b` in place for lower-triangular row-major `l`.
pub(crate) fn forward_solve(l: &[f64], n: usize, b: &mut [f64]) {
    for i in 0..n {
        let row = &l[i * n..i * n + i + 1];
        let s = b[i] - dot(&row[..i], &b[..i]);
        b[i] = s / row[i];
    }
}

/// Solves `L^T w = b` in place.
pub(crate) fn backward_solve(l: &[f64], n: usize, b: &mut [f64]) {
    for i in (0..n).rev() {
        let mut s = b[i];
        for k in (i + 1)..n {
            s -= l[k * n + i] * b[k];
        }
        b[i] = s / l[i * n + i];
    }
}

/// `log det A = 2 sum log L_ii`.
pub(crate) fn log_det_from_chol(l: &[f64], n: usize) -> f64 {
    (0..n).map(|i| l[i * n + i].ln()).sum::<f64>() * 2.0
}
