//! MLP velocity field: affine → tanh → affine → tanh → affine over the
//! flattened real state, with the time coordinate entering the first layer
//! through its own weight column.

use alloc::vec;
use alloc::vec::Vec;

use super::dense::{matmul_nn_acc, matmul_nt_acc, outer_acc};
use super::{ModelShape, TensorSpec};
use crate::math;

pub(super) struct NodeLayout {
    w1: core::ops::Range<usize>,
    w1_t: core::ops::Range<usize>,
    b1: core::ops::Range<usize>,
    w2: core::ops::Range<usize>,
    b2: core::ops::Range<usize>,
    w3: core::ops::Range<usize>,
    b3: core::ops::Range<usize>,
}

impl NodeLayout {
    pub(super) fn new(layout: &[TensorSpec]) -> Self {
        let get = |name: &str| {
            layout
                .iter()
                .find(|t| t.name == name)
                .map(TensorSpec::range)
                .expect("NODE layout tensor")
        };
        NodeLayout {
            w1: get("w1"),
            w1_t: get("w1_t"),
            b1: get("b1"),
            w2: get("w2"),
            b2: get("b2"),
            w3: get("w3"),
            b3: get("b3"),
        }
    }
}

pub(super) struct NodeNet {
    pub(super) layout: NodeLayout,
    pub(super) dim: usize,
    pub(super) hidden: usize,
    pub(super) batch: usize,
}

struct Activations {
    h1: Vec<f64>,
    h2: Vec<f64>,
}

impl NodeNet {
    pub(super) fn new(shape: &ModelShape, layout: &[TensorSpec], batch: usize) -> Self {
        NodeNet {
            layout: NodeLayout::new(layout),
            dim: shape.state_len(),
            hidden: shape.hidden,
            batch,
        }
    }

    fn hidden_layers(&self, p: &[f64], t: f64, x: &[f64]) -> Activations {
        let (b, d, h) = (self.batch, self.dim, self.hidden);
        let l = &self.layout;
        let mut h1 = vec![0.0; b * h];
        for row in h1.chunks_exact_mut(h) {
            for (j, v) in row.iter_mut().enumerate() {
                *v = p[l.b1.start + j] + t * p[l.w1_t.start + j];
            }
        }
        matmul_nt_acc(x, &p[l.w1.clone()], &mut h1, b, d, h);
        h1.iter_mut().for_each(|v| *v = math::tanh(*v));

        let mut h2 = vec![0.0; b * h];
        for row in h2.chunks_exact_mut(h) {
            row.copy_from_slice(&p[l.b2.clone()]);
        }
        matmul_nt_acc(&h1, &p[l.w2.clone()], &mut h2, b, h, h);
        h2.iter_mut().for_each(|v| *v = math::tanh(*v));
        Activations { h1, h2 }
    }

    pub(super) fn eval(&self, p: &[f64], t: f64, x: &[f64], out: &mut [f64]) {
        let (b, d, h) = (self.batch, self.dim, self.hidden);
        let l = &self.layout;
        let act = self.hidden_layers(p, t, x);
        for row in out.chunks_exact_mut(d) {
            row.copy_from_slice(&p[l.b3.clone()]);
        }
        matmul_nt_acc(&act.h2, &p[l.w3.clone()], out, b, h, d);
    }

    pub(super) fn vjp(
        &self,
        p: &[f64],
        t: f64,
        x: &[f64],
        out_bar: &[f64],
        x_bar: &mut [f64],
        p_bar: &mut [f64],
    ) {
        let (b, d, h) = (self.batch, self.dim, self.hidden);
        let l = &self.layout;
        let act = self.hidden_layers(p, t, x);

        // Output layer.
        for row in out_bar.chunks_exact(d) {
            for (acc, g) in p_bar[l.b3.clone()].iter_mut().zip(row) {
                *acc += g;
            }
        }
        outer_acc(out_bar, &act.h2, &mut p_bar[l.w3.clone()], b, d, h);
        let mut a2_bar = vec![0.0; b * h];
        matmul_nn_acc(out_bar, &p[l.w3.clone()], &mut a2_bar, b, d, h);
        for (g, y) in a2_bar.iter_mut().zip(&act.h2) {
            *g *= 1.0 - y * y;
        }

        // Second hidden layer.
        for row in a2_bar.chunks_exact(h) {
            for (acc, g) in p_bar[l.b2.clone()].iter_mut().zip(row) {
                *acc += g;
            }
        }
        outer_acc(&a2_bar, &act.h1, &mut p_bar[l.w2.clone()], b, h, h);
        let mut a1_bar = vec![0.0; b * h];
        matmul_nn_acc(&a2_bar, &p[l.w2.clone()], &mut a1_bar, b, h, h);
        for (g, y) in a1_bar.iter_mut().zip(&act.h1) {
            *g *= 1.0 - y * y;
        }

        // First layer, including the time column.
        for row in a1_bar.chunks_exact(h) {
            for (j, g) in row.iter().enumerate() {
                p_bar[l.b1.start + j] += g;
                p_bar[l.w1_t.start + j] += t * g;
            }
        }
        outer_acc(&a1_bar, x, &mut p_bar[l.w1.clone()], b, h, d);
        x_bar.fill(0.0);
        matmul_nn_acc(&a1_bar, &p[l.w1.clone()], x_bar, b, h, d);
    }
}
