//! Complex matrix inversion by LU decomposition with partial pivoting.

use alloc::format;
use alloc::vec::Vec;

use crate::complex::{Complex64, ComplexMatrix};
use crate::{Error, Result};

/// Pivots smaller than this fraction of the largest input entry are treated
/// as singular.
pub const SINGULAR_THRESHOLD: f64 = 1e-12;

/// In-place LU factorization `P·A = L·U` (unit lower `L`).
#[derive(Debug, Clone)]
pub struct Lu {
    lu: ComplexMatrix,
    perm: Vec<usize>,
}

impl Lu {
    pub fn factor(m: &ComplexMatrix) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::shape(
                "square matrix",
                format!("{}x{}", m.rows(), m.cols()),
            ));
        }
        let n = m.rows();
        let threshold = SINGULAR_THRESHOLD * m.max_abs();
        let mut lu = m.clone();
        let mut perm: Vec<usize> = (0..n).collect();

        for k in 0..n {
            let (pivot_row, pivot_mag) = (k..n)
                .map(|r| (r, lu[(r, k)].norm()))
                .fold((k, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
            if !(pivot_mag >= threshold) || pivot_mag == 0.0 {
                return Err(Error::Singular {
                    pivot: pivot_mag.max(0.0),
                    threshold,
                });
            }
            if pivot_row != k {
                perm.swap(k, pivot_row);
                let data = lu.as_mut_slice();
                for c in 0..n {
                    data.swap(k * n + c, pivot_row * n + c);
                }
            }
            let inv_pivot = Complex64::new(1.0, 0.0) / lu[(k, k)];
            for r in k + 1..n {
                let factor = lu[(r, k)] * inv_pivot;
                lu[(r, k)] = factor;
                if factor == Complex64::new(0.0, 0.0) {
                    continue;
                }
                let data = lu.as_mut_slice();
                for c in k + 1..n {
                    let upper = data[k * n + c];
                    data[r * n + c] -= factor * upper;
                }
            }
        }
        Ok(Lu { lu, perm })
    }

    /// Solves `A·x = b` for one right-hand side.
    pub fn solve_vec(&self, b: &[Complex64]) -> Vec<Complex64> {
        let n = self.lu.rows();
        let mut x: Vec<Complex64> = self.perm.iter().map(|&p| b[p]).collect();
        for r in 0..n {
            let mut acc = x[r];
            for c in 0..r {
                acc -= self.lu[(r, c)] * x[c];
            }
            x[r] = acc;
        }
        for r in (0..n).rev() {
            let mut acc = x[r];
            for c in r + 1..n {
                acc -= self.lu[(r, c)] * x[c];
            }
            x[r] = acc / self.lu[(r, r)];
        }
        x
    }

    pub fn inverse(&self) -> ComplexMatrix {
        let n = self.lu.rows();
        let mut inv = ComplexMatrix::zeros(n, n);
        let mut e = alloc::vec![Complex64::new(0.0, 0.0); n];
        for c in 0..n {
            e.iter_mut().for_each(|z| *z = Complex64::new(0.0, 0.0));
            e[c] = Complex64::new(1.0, 0.0);
            let col = self.solve_vec(&e);
            for r in 0..n {
                inv[(r, c)] = col[r];
            }
        }
        inv
    }
}

pub fn mat_inverse(m: &ComplexMatrix) -> Result<ComplexMatrix> {
    Ok(Lu::factor(m)?.inverse())
}
