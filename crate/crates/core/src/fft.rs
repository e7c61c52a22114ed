//! Discrete Fourier transforms and spectral mode truncation.
//!
//! Convention: the forward transform is unnormalized,
//! `S[k] = Σ_j m[j]·exp(−2πi⟨k,j⟩/n)` on each axis, and the inverse carries
//! the full `1/(rows·cols)` factor, so `idft2 ∘ dft2` is the identity.
//!
//! One-dimensional transforms use a recursive mixed-radix Cooley-Tukey plan
//! (any length; prime factors fall back to a direct butterfly), and 2-D
//! transforms are done row-column.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::complex::{cis, Complex64, ComplexMatrix, ComplexSpectrum};
use crate::{Error, Result};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Forward,
    /// Unnormalized inverse (positive exponent).
    Backward,
}

/// Precomputed plan for length-`n` transforms.
#[derive(Debug, Clone)]
pub struct Dft1 {
    n: usize,
    factors: Vec<usize>,
    twiddles: Vec<Complex64>,
}

impl Dft1 {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "transform length must be positive");
        let twiddles = (0..n)
            .map(|k| cis(-2.0 * PI * k as f64 / n as f64))
            .collect();
        Dft1 {
            n,
            factors: factorize(n),
            twiddles,
        }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Transforms `data` in place; `scratch` must hold at least `n` entries.
    pub fn process(&self, data: &mut [Complex64], scratch: &mut [Complex64], dir: Direction) {
        let n = self.n;
        debug_assert_eq!(data.len(), n);
        if n == 1 {
            return;
        }
        let scratch = &mut scratch[..n];
        scratch.copy_from_slice(data);
        self.recurse(scratch, 1, n, data, &self.factors, 1, dir);
    }

    #[allow(clippy::too_many_arguments)]
    fn recurse(
        &self,
        input: &[Complex64],
        stride: usize,
        n: usize,
        out: &mut [Complex64],
        factors: &[usize],
        tw_stride: usize,
        dir: Direction,
    ) {
        if n == 1 {
            out[0] = input[0];
            return;
        }
        let p = factors[0];
        let m = n / p;
        for q in 0..p {
            self.recurse(
                &input[q * stride..],
                stride * p,
                m,
                &mut out[q * m..(q + 1) * m],
                &factors[1..],
                tw_stride * p,
                dir,
            );
        }
        let twiddle = |e: usize| {
            let w = self.twiddles[(e % n) * tw_stride];
            match dir {
                Direction::Forward => w,
                Direction::Backward => w.conj(),
            }
        };
        if p == 2 {
            for k in 0..m {
                let a = out[k];
                let b = out[k + m] * twiddle(k);
                out[k] = a + b;
                out[k + m] = a - b;
            }
            return;
        }
        let mut tmp = [ZERO; 16];
        let mut heap;
        let tmp: &mut [Complex64] = if p <= 16 {
            &mut tmp[..p]
        } else {
            heap = vec![ZERO; p];
            &mut heap
        };
        for k in 0..m {
            for (q, t) in tmp.iter_mut().enumerate() {
                *t = out[q * m + k];
            }
            // Σ_q t_q·w^q with w = twiddle(idx), by Horner's rule.
            for r in 0..p {
                let idx = k + r * m;
                let w = twiddle(idx);
                let mut acc = tmp[p - 1];
                for &t in tmp[..p - 1].iter().rev() {
                    acc = acc * w + t;
                }
                out[idx] = acc;
            }
        }
    }
}

fn factorize(mut n: usize) -> Vec<usize> {
    let mut factors = Vec::new();
    let mut p = 2;
    while n > 1 {
        if p * p > n {
            factors.push(n);
            break;
        }
        if n % p == 0 {
            factors.push(p);
            n /= p;
        } else {
            p += 1;
        }
    }
    factors
}

/// Row-column plan for `rows × cols` transforms on row-major buffers.
#[derive(Debug, Clone)]
pub struct Dft2 {
    rows: Dft1,
    cols: Dft1,
}

impl Dft2 {
    pub fn new(rows: usize, cols: usize) -> Self {
        Dft2 {
            rows: Dft1::new(rows),
            cols: Dft1::new(cols),
        }
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows.len(), self.cols.len())
    }

    /// Scratch length required by [`Dft2::process`].
    pub fn scratch_len(&self) -> usize {
        2 * self.rows.len().max(self.cols.len())
    }

    /// Unnormalized in-place transform in either direction.
    pub fn process(&self, data: &mut [Complex64], scratch: &mut [Complex64], dir: Direction) {
        let (nr, nc) = self.shape();
        debug_assert_eq!(data.len(), nr * nc);
        let (line, work) = scratch.split_at_mut(nr.max(nc));
        for row in data.chunks_exact_mut(nc) {
            self.cols.process(row, work, dir);
        }
        let col_buf = &mut line[..nr];
        for c in 0..nc {
            for r in 0..nr {
                col_buf[r] = data[r * nc + c];
            }
            self.rows.process(col_buf, work, dir);
            for r in 0..nr {
                data[r * nc + c] = col_buf[r];
            }
        }
    }

    pub fn forward(&self, data: &mut [Complex64], scratch: &mut [Complex64]) {
        self.process(data, scratch, Direction::Forward);
    }

    /// Normalized inverse.
    pub fn inverse(&self, data: &mut [Complex64], scratch: &mut [Complex64]) {
        self.process(data, scratch, Direction::Backward);
        let scale = 1.0 / data.len() as f64;
        for z in data.iter_mut() {
            *z *= scale;
        }
    }
}

pub fn dft2(m: &ComplexMatrix) -> ComplexSpectrum {
    let plan = Dft2::new(m.rows(), m.cols());
    let mut out = m.clone();
    let mut scratch = vec![ZERO; plan.scratch_len()];
    plan.forward(out.as_mut_slice(), &mut scratch);
    out
}

/// Inverse of [`dft2`]. A truncated spectrum is already stored at full
/// shape, so `shape` only guards against transforming onto the wrong grid.
pub fn idft2(s: &ComplexSpectrum, shape: (usize, usize)) -> Result<ComplexMatrix> {
    if s.shape() != shape {
        return Err(Error::shape(
            format!("{}x{}", shape.0, shape.1),
            format!("{}x{}", s.rows(), s.cols()),
        ));
    }
    let plan = Dft2::new(s.rows(), s.cols());
    let mut out = s.clone();
    let mut scratch = vec![ZERO; plan.scratch_len()];
    plan.inverse(out.as_mut_slice(), &mut scratch);
    Ok(out)
}

/// Indices of the retained low-frequency modes along one axis of length `n`:
/// `[0, ⌈m/2⌉) ∪ [n − ⌊m/2⌋, n)` with `m = min(modes, n)`, in ascending
/// order.
pub fn retained_modes(n: usize, modes: usize) -> Vec<usize> {
    let m = modes.min(n);
    let low = m.div_ceil(2);
    let high = m / 2;
    (0..low).chain(n - high..n).collect()
}

/// Boolean mask over one axis, true where [`retained_modes`] keeps the index.
pub fn mode_mask(n: usize, modes: usize) -> Vec<bool> {
    let mut mask = vec![false; n];
    for k in retained_modes(n, modes) {
        mask[k] = true;
    }
    mask
}

/// Zeroes every mode outside the symmetric low-pass window on both axes.
pub fn mode_truncate(s: &ComplexSpectrum, modes: usize) -> Result<ComplexSpectrum> {
    if modes == 0 {
        return Err(Error::invalid("mode cutoff must be at least 1"));
    }
    let row_mask = mode_mask(s.rows(), modes);
    let col_mask = mode_mask(s.cols(), modes);
    Ok(ComplexMatrix::from_fn(s.rows(), s.cols(), |r, c| {
        if row_mask[r] && col_mask[c] {
            s[(r, c)]
        } else {
            ZERO
        }
    }))
}
