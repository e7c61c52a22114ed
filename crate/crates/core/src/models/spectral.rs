//! The spectral layer shared by FNDE, modified FNDE and FNO:
//! `a = W·z + F⁻¹[κ·F(z)]`, where `W·z` mixes channels per pixel and the
//! spectral product contracts channels per retained mode.

use alloc::vec;
use alloc::vec::Vec;

use super::{ModelShape, TensorSpec};
use crate::complex::Complex64;
use crate::fft::{retained_modes, Direction, Dft2};
use crate::math;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(super) enum Activation {
    /// `σ(a) − z`
    TanhMinusState,
    /// `a`
    Linear,
    /// `σ(a)`
    Tanh,
}

pub(super) struct SpectralNet {
    channels: usize,
    n: usize,
    modes: usize,
    batch: usize,
    activation: Activation,
    plan: Dft2,
    /// Global index of each retained mode along an axis.
    retained: Vec<usize>,
    w: core::ops::Range<usize>,
    kappa: core::ops::Range<usize>,
}

#[inline]
fn tanh_c(z: Complex64) -> Complex64 {
    Complex64::new(math::tanh(z.re), math::tanh(z.im))
}

impl SpectralNet {
    pub(super) fn new(
        shape: &ModelShape,
        layout: &[TensorSpec],
        batch: usize,
        activation: Activation,
    ) -> Self {
        let get = |name: &str| {
            layout
                .iter()
                .find(|t| t.name == name)
                .map(TensorSpec::range)
                .expect("spectral layout tensor")
        };
        SpectralNet {
            channels: shape.channels,
            n: shape.n_p,
            modes: shape.modes,
            batch,
            activation,
            plan: Dft2::new(shape.n_p, shape.n_p),
            retained: retained_modes(shape.n_p, shape.modes),
            w: get("w"),
            kappa: get("kappa"),
        }
    }

    fn sample_len(&self) -> usize {
        self.channels * self.n * self.n
    }

    /// Pre-activation for one sample; also returns `F(z)` per channel.
    fn preactivation(&self, p: &[f64], z: &[Complex64]) -> (Vec<Complex64>, Vec<Complex64>) {
        let (c, nn, m) = (self.channels, self.n * self.n, self.modes);
        let w: &[Complex64] = bytemuck::cast_slice(&p[self.w.clone()]);
        let kappa: &[Complex64] = bytemuck::cast_slice(&p[self.kappa.clone()]);
        let mut scratch = vec![ZERO; self.plan.scratch_len()];

        let mut z_hat = z.to_vec();
        for ch in z_hat.chunks_exact_mut(nn) {
            self.plan.forward(ch, &mut scratch);
        }

        let mut a = vec![ZERO; c * nn];
        for co in 0..c {
            let y = &mut a[co * nn..(co + 1) * nn];
            for ci in 0..c {
                let kern = &kappa[(co * c + ci) * m * m..(co * c + ci + 1) * m * m];
                let zh = &z_hat[ci * nn..(ci + 1) * nn];
                for (lr, &r) in self.retained.iter().enumerate() {
                    for (lc, &col) in self.retained.iter().enumerate() {
                        let k = r * self.n + col;
                        y[k] += kern[lr * m + lc] * zh[k];
                    }
                }
            }
            self.plan.inverse(y, &mut scratch);
            for ci in 0..c {
                let wc = w[co * c + ci];
                if wc == ZERO {
                    continue;
                }
                for (yk, &zk) in y.iter_mut().zip(&z[ci * nn..(ci + 1) * nn]) {
                    *yk += wc * zk;
                }
            }
        }
        (a, z_hat)
    }

    pub(super) fn eval(&self, p: &[f64], z: &[f64], out: &mut [f64]) {
        let len = self.sample_len();
        let z: &[Complex64] = bytemuck::cast_slice(z);
        let out: &mut [Complex64] = bytemuck::cast_slice_mut(out);
        for b in 0..self.batch {
            let zs = &z[b * len..(b + 1) * len];
            let (a, _) = self.preactivation(p, zs);
            let os = &mut out[b * len..(b + 1) * len];
            match self.activation {
                Activation::Linear => os.copy_from_slice(&a),
                Activation::Tanh => {
                    for (o, &ak) in os.iter_mut().zip(&a) {
                        *o = tanh_c(ak);
                    }
                }
                Activation::TanhMinusState => {
                    for ((o, &ak), &zk) in os.iter_mut().zip(&a).zip(zs) {
                        *o = tanh_c(ak) - zk;
                    }
                }
            }
        }
    }

    pub(super) fn vjp(
        &self,
        p: &[f64],
        z: &[f64],
        out_bar: &[f64],
        z_bar: &mut [f64],
        p_bar: &mut [f64],
    ) {
        let (c, nn, m) = (self.channels, self.n * self.n, self.modes);
        let len = self.sample_len();
        let inv_nn = 1.0 / nn as f64;
        let z: &[Complex64] = bytemuck::cast_slice(z);
        let out_bar: &[Complex64] = bytemuck::cast_slice(out_bar);
        let z_bar: &mut [Complex64] = bytemuck::cast_slice_mut(z_bar);
        let w: &[Complex64] = bytemuck::cast_slice(&p[self.w.clone()]);
        let kappa: &[Complex64] = bytemuck::cast_slice(&p[self.kappa.clone()]);
        let mut scratch = vec![ZERO; self.plan.scratch_len()];

        let (w_bar_range, kappa_bar_range) = (self.w.clone(), self.kappa.clone());
        let (head, tail) = p_bar.split_at_mut(kappa_bar_range.start);
        let w_bar: &mut [Complex64] = bytemuck::cast_slice_mut(&mut head[w_bar_range]);
        let kappa_bar: &mut [Complex64] =
            bytemuck::cast_slice_mut(&mut tail[..kappa_bar_range.len()]);

        for b in 0..self.batch {
            let zs = &z[b * len..(b + 1) * len];
            let ob = &out_bar[b * len..(b + 1) * len];
            let zb = &mut z_bar[b * len..(b + 1) * len];
            let (a, z_hat) = self.preactivation(p, zs);

            let mut a_bar: Vec<Complex64> = match self.activation {
                Activation::Linear => ob.to_vec(),
                Activation::Tanh | Activation::TanhMinusState => ob
                    .iter()
                    .zip(&a)
                    .map(|(g, ak)| {
                        let t = tanh_c(*ak);
                        Complex64::new(g.re * (1.0 - t.re * t.re), g.im * (1.0 - t.im * t.im))
                    })
                    .collect(),
            };
            match self.activation {
                Activation::TanhMinusState => {
                    for (zk, g) in zb.iter_mut().zip(ob) {
                        *zk = -g;
                    }
                }
                _ => zb.fill(ZERO),
            }

            // Pointwise channel mixing.
            for co in 0..c {
                let ab = &a_bar[co * nn..(co + 1) * nn];
                for ci in 0..c {
                    let zc = &zs[ci * nn..(ci + 1) * nn];
                    let mut acc = ZERO;
                    for (g, zk) in ab.iter().zip(zc) {
                        acc += g * zk.conj();
                    }
                    w_bar[co * c + ci] += acc;
                    let wc = w[co * c + ci].conj();
                    if wc != ZERO {
                        for (zbk, g) in zb[ci * nn..(ci + 1) * nn].iter_mut().zip(ab) {
                            *zbk += wc * g;
                        }
                    }
                }
            }

            // Spectral path: ŷ̄ = F(ā)/n², then through the per-mode product.
            for ch in a_bar.chunks_exact_mut(nn) {
                self.plan.process(ch, &mut scratch, Direction::Forward);
                ch.iter_mut().for_each(|v| *v *= inv_nn);
            }
            let mut z_hat_bar = vec![ZERO; c * nn];
            for co in 0..c {
                let yb = &a_bar[co * nn..(co + 1) * nn];
                for ci in 0..c {
                    let base = (co * c + ci) * m * m;
                    let zh = &z_hat[ci * nn..(ci + 1) * nn];
                    let zhb = &mut z_hat_bar[ci * nn..(ci + 1) * nn];
                    for (lr, &r) in self.retained.iter().enumerate() {
                        for (lc, &col) in self.retained.iter().enumerate() {
                            let k = r * self.n + col;
                            let kl = base + lr * m + lc;
                            kappa_bar[kl] += yb[k] * zh[k].conj();
                            zhb[k] += kappa[kl].conj() * yb[k];
                        }
                    }
                }
            }
            // Adjoint of the unnormalized forward transform.
            for (ci, ch) in z_hat_bar.chunks_exact_mut(nn).enumerate() {
                self.plan.process(ch, &mut scratch, Direction::Backward);
                for (zbk, v) in zb[ci * nn..(ci + 1) * nn].iter_mut().zip(ch.iter()) {
                    *zbk += v;
                }
            }
        }
    }
}
