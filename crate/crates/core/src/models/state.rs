use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::complex::{Complex64, ComplexMatrix};
use crate::theory::MomentumGrid;
use crate::{Error, Result};

use super::CHANNELS;

/// `C` complex `n × n` channels stored as one interleaved real vector,
/// channel-major then row-major.
///
/// The initial state puts the free S-matrix (the identity) in channel 0,
/// `(p_f + i·p_i)/p_scale` in channel 1 (row momentum in the real part,
/// column momentum in the imaginary part), `λ·𝟙` in channel 2 and `m·𝟙` in
/// channel 3.
#[derive(Debug, Clone, PartialEq)]
pub struct HiddenState {
    channels: usize,
    n: usize,
    data: Vec<f64>,
}

impl HiddenState {
    pub fn zeros(channels: usize, n: usize) -> Self {
        HiddenState {
            channels,
            n,
            data: vec![0.0; 2 * channels * n * n],
        }
    }

    pub fn from_raw(channels: usize, n: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != 2 * channels * n * n {
            return Err(Error::shape(
                format!("{} reals", 2 * channels * n * n),
                format!("{}", data.len()),
            ));
        }
        Ok(HiddenState { channels, n, data })
    }

    pub fn initial(grid: &MomentumGrid, coupling: f64, mass: f64, momentum_scale: f64) -> Self {
        let n = grid.n_p;
        let p = grid.points();
        let mut z = HiddenState::zeros(CHANNELS, n);
        let one = Complex64::new(1.0, 0.0);
        z.set_channel(0, &ComplexMatrix::identity(n));
        z.set_channel(
            1,
            &ComplexMatrix::from_fn(n, n, |f, i| {
                Complex64::new(p[f] / momentum_scale, p[i] / momentum_scale)
            }),
        );
        z.set_channel(2, &ComplexMatrix::from_fn(n, n, |_, _| one * coupling));
        z.set_channel(3, &ComplexMatrix::from_fn(n, n, |_, _| one * mass));
        z
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_raw(self) -> Vec<f64> {
        self.data
    }

    pub fn as_complex(&self) -> &[Complex64] {
        bytemuck::cast_slice(&self.data)
    }

    pub fn channel(&self, c: usize) -> ComplexMatrix {
        let nn = self.n * self.n;
        let z = &self.as_complex()[c * nn..(c + 1) * nn];
        ComplexMatrix::from_vec(self.n, self.n, z.to_vec()).expect("channel has n² entries")
    }

    pub fn set_channel(&mut self, c: usize, m: &ComplexMatrix) {
        assert_eq!(m.shape(), (self.n, self.n));
        let nn = self.n * self.n;
        let dst: &mut [Complex64] = bytemuck::cast_slice_mut(&mut self.data);
        dst[c * nn..(c + 1) * nn].copy_from_slice(m.as_slice());
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// `self + s·other`.
    pub fn axpy(&self, s: f64, other: &HiddenState) -> HiddenState {
        HiddenState {
            channels: self.channels,
            n: self.n,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a + s * b)
                .collect(),
        }
    }
}
