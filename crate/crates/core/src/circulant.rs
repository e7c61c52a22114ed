//! Doubly-block circulant form of 2-D circular convolution.
//!
//! For an `n × n` grid and row-major vectorization `vec(X)[a·n + b] = X[a, b]`,
//! the operator `D = circulant_embed(k, n)` satisfies
//! `D·vec(X) = vec(k ⊛ X)` with
//! `(k ⊛ X)[a, b] = Σ_{j,l} k[(a−j) mod n, (b−l) mod n]·X[j, l]`.

use alloc::format;

use crate::complex::{Complex64, ComplexMatrix};
use crate::{Error, Result};

/// Relative tolerance for accepting a matrix as doubly-block circulant.
pub const STRUCTURE_TOLERANCE: f64 = 1e-8;

pub fn circulant_embed(kernel: &ComplexMatrix, n: usize) -> Result<ComplexMatrix> {
    if kernel.rows() > n || kernel.cols() > n {
        return Err(Error::shape(
            format!("kernel no larger than {n}x{n}"),
            format!("{}x{}", kernel.rows(), kernel.cols()),
        ));
    }
    let padded = pad(kernel, n);
    let dim = n * n;
    Ok(ComplexMatrix::from_fn(dim, dim, |row, col| {
        let (a, b) = (row / n, row % n);
        let (j, l) = (col / n, col % n);
        padded[((a + n - j) % n, (b + n - l) % n)]
    }))
}

/// Left inverse of [`circulant_embed`]: reads the generating kernel from the
/// first column and rejects matrices that are not doubly-block circulant or
/// whose kernel does not fit `kernel_shape`.
pub fn circulant_extract(
    d: &ComplexMatrix,
    kernel_shape: (usize, usize),
) -> Result<ComplexMatrix> {
    let dim = d.rows();
    let n = integer_sqrt(dim);
    if !d.is_square() || n * n != dim {
        return Err(Error::shape(
            "square operator of size n²×n²",
            format!("{}x{}", d.rows(), d.cols()),
        ));
    }
    let (kr, kc) = kernel_shape;
    if kr > n || kc > n || kr == 0 || kc == 0 {
        return Err(Error::shape(
            format!("kernel shape within 1..={n}"),
            format!("{kr}x{kc}"),
        ));
    }
    // First column holds k[(a, b)] at row a·n + b.
    let full = ComplexMatrix::from_fn(n, n, |a, b| d[(a * n + b, 0)]);

    let scale = d.max_abs();
    let mut deviation = 0.0f64;
    for row in 0..dim {
        let (a, b) = (row / n, row % n);
        for col in 0..dim {
            let (j, l) = (col / n, col % n);
            let expect = full[((a + n - j) % n, (b + n - l) % n)];
            deviation = deviation.max((d[(row, col)] - expect).norm());
        }
    }
    for a in 0..n {
        for b in 0..n {
            if a >= kr || b >= kc {
                deviation = deviation.max(full[(a, b)].norm());
            }
        }
    }
    let relative = if scale > 0.0 { deviation / scale } else { 0.0 };
    if relative > STRUCTURE_TOLERANCE {
        return Err(Error::Structure {
            deviation: relative,
        });
    }
    Ok(full.block(0, 0, kr, kc))
}

fn pad(kernel: &ComplexMatrix, n: usize) -> ComplexMatrix {
    ComplexMatrix::from_fn(n, n, |r, c| {
        if r < kernel.rows() && c < kernel.cols() {
            kernel[(r, c)]
        } else {
            Complex64::new(0.0, 0.0)
        }
    })
}

fn integer_sqrt(x: usize) -> usize {
    let mut r = 0usize;
    while (r + 1) * (r + 1) <= x {
        r += 1;
    }
    r
}
