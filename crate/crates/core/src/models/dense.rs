// Row-major dense kernels for the NODE MLP. The long dimension is processed
// in chunks so the batch rows of a chunk stay cache resident while a weight
// matrix streams past once.

const CHUNK: usize = 1024;

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0f64; 4];
    let (a4, ar) = a.split_at(a.len() - a.len() % 4);
    let (b4, br) = b.split_at(a4.len());
    for (x, y) in a4.chunks_exact(4).zip(b4.chunks_exact(4)) {
        acc[0] += x[0] * y[0];
        acc[1] += x[1] * y[1];
        acc[2] += x[2] * y[2];
        acc[3] += x[3] * y[3];
    }
    let mut tail = 0.0;
    for (x, y) in ar.iter().zip(br) {
        tail += x * y;
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

#[inline]
fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// `out[b][j] += Σ_k a[b][k]·w[j][k]` for `a: B×K`, `w: N×K`, `out: B×N`.
pub(super) fn matmul_nt_acc(a: &[f64], w: &[f64], out: &mut [f64], batch: usize, k: usize, n: usize) {
    debug_assert_eq!(a.len(), batch * k);
    debug_assert_eq!(w.len(), n * k);
    debug_assert_eq!(out.len(), batch * n);
    let mut start = 0;
    while start < k {
        let end = (start + CHUNK).min(k);
        for j in 0..n {
            let wj = &w[j * k + start..j * k + end];
            for b in 0..batch {
                out[b * n + j] += dot(&a[b * k + start..b * k + end], wj);
            }
        }
        start = end;
    }
}

/// `out[b][k] += Σ_j g[b][j]·w[j][k]` for `g: B×N`, `w: N×K`, `out: B×K`.
pub(super) fn matmul_nn_acc(g: &[f64], w: &[f64], out: &mut [f64], batch: usize, n: usize, k: usize) {
    debug_assert_eq!(g.len(), batch * n);
    debug_assert_eq!(w.len(), n * k);
    debug_assert_eq!(out.len(), batch * k);
    let mut start = 0;
    while start < k {
        let end = (start + CHUNK).min(k);
        for j in 0..n {
            let wj = &w[j * k + start..j * k + end];
            for b in 0..batch {
                let coeff = g[b * n + j];
                if coeff != 0.0 {
                    axpy(coeff, wj, &mut out[b * k + start..b * k + end]);
                }
            }
        }
        start = end;
    }
}

/// `w_bar[j][k] += Σ_b g[b][j]·a[b][k]` for `g: B×N`, `a: B×K`, `w_bar: N×K`.
pub(super) fn outer_acc(g: &[f64], a: &[f64], w_bar: &mut [f64], batch: usize, n: usize, k: usize) {
    debug_assert_eq!(g.len(), batch * n);
    debug_assert_eq!(a.len(), batch * k);
    debug_assert_eq!(w_bar.len(), n * k);
    let mut start = 0;
    while start < k {
        let end = (start + CHUNK).min(k);
        for j in 0..n {
            let row = &mut w_bar[j * k + start..j * k + end];
            for b in 0..batch {
                let coeff = g[b * n + j];
                if coeff != 0.0 {
                    axpy(coeff, &a[b * k + start..b * k + end], row);
                }
            }
        }
        start = end;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    // a: 2×3, w: 2×3 (N=2, K=3)
    const A: [f64; 6] = [1.0, 2.0, 3.0, -1.0, 0.5, 2.0];
    const W: [f64; 6] = [0.5, -1.0, 2.0, 1.0, 1.0, 1.0];

    #[test]
    fn nt_product() {
        let mut out = vec![0.0; 4];
        matmul_nt_acc(&A, &W, &mut out, 2, 3, 2);
        assert_eq!(out, vec![4.5, 6.0, 3.0, 1.5]);
    }

    #[test]
    fn nn_product() {
        let g = [1.0, 2.0, 0.0, -1.0];
        let mut out = vec![0.0; 6];
        matmul_nn_acc(&g, &W, &mut out, 2, 2, 3);
        assert_eq!(out, vec![2.5, 1.0, 4.0, -1.0, -1.0, -1.0]);
    }

    #[test]
    fn outer_product() {
        let g = [1.0, 2.0, 0.0, -1.0];
        let mut out = vec![0.0; 6];
        outer_acc(&g, &A, &mut out, 2, 2, 3);
        assert_eq!(out, vec![1.0, 2.0, 3.0, 3.0, 3.5, 4.0]);
    }

    #[test]
    fn chunking_matches_plain_loop() {
        let k = 2 * CHUNK + 37;
        let a: alloc::vec::Vec<f64> = (0..3 * k).map(|i| ((i * 7) % 13) as f64 - 6.0).collect();
        let w: alloc::vec::Vec<f64> = (0..2 * k).map(|i| ((i * 5) % 11) as f64 - 5.0).collect();
        let mut out = vec![0.0; 6];
        matmul_nt_acc(&a, &w, &mut out, 3, k, 2);
        for b in 0..3 {
            for j in 0..2 {
                let expect: f64 = (0..k).map(|i| a[b * k + i] * w[j * k + i]).sum();
                assert_eq!(out[b * 2 + j], expect);
            }
        }
    }
}
