use alloc::vec::Vec;

use super::node::NodeNet;
use super::spectral::{Activation, SpectralNet};
use super::{HiddenState, ModelKind, ModelParams, ModelShape};
use crate::complex::ComplexMatrix;
use crate::ode::{integrate, Bound, DiffField, TimeSpan};
use crate::theory::Sample;
use crate::{Error, Result};

enum Net {
    Node(NodeNet),
    Spectral(SpectralNet),
}

/// The velocity field (or, for FNO, the single layer map) of a model kind,
/// evaluated over a batch of hidden states laid end to end.
pub struct ModelField {
    kind: ModelKind,
    shape: ModelShape,
    batch: usize,
    param_len: usize,
    net: Net,
}

impl ModelField {
    pub fn new(kind: ModelKind, shape: ModelShape, batch: usize) -> Self {
        let layout = super::layout_for(kind, &shape);
        let param_len = layout.iter().map(|t| t.real_len()).sum();
        let net = match kind {
            ModelKind::Node => Net::Node(NodeNet::new(&shape, &layout, batch)),
            ModelKind::Fnde => Net::Spectral(SpectralNet::new(
                &shape,
                &layout,
                batch,
                Activation::TanhMinusState,
            )),
            ModelKind::FndeMod => {
                Net::Spectral(SpectralNet::new(&shape, &layout, batch, Activation::Linear))
            }
            ModelKind::Fno => {
                Net::Spectral(SpectralNet::new(&shape, &layout, batch, Activation::Tanh))
            }
        };
        ModelField {
            kind,
            shape,
            batch,
            param_len,
            net,
        }
    }

    pub fn for_params(params: &ModelParams, batch: usize) -> Self {
        Self::new(params.kind, params.shape, batch)
    }

    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    pub fn batch(&self) -> usize {
        self.batch
    }
}

impl DiffField for ModelField {
    fn state_len(&self) -> usize {
        self.batch * self.shape.state_len()
    }

    fn param_len(&self) -> usize {
        self.param_len
    }

    fn eval(&self, params: &[f64], t: f64, z: &[f64], out: &mut [f64]) {
        match &self.net {
            Net::Node(net) => net.eval(params, t, z, out),
            Net::Spectral(net) => net.eval(params, z, out),
        }
    }

    fn vjp(
        &self,
        params: &[f64],
        t: f64,
        z: &[f64],
        out_bar: &[f64],
        z_bar: &mut [f64],
        params_bar: &mut [f64],
    ) {
        match &self.net {
            Net::Node(net) => net.vjp(params, t, z, out_bar, z_bar, params_bar),
            Net::Spectral(net) => net.vjp(params, z, out_bar, z_bar, params_bar),
        }
    }
}

fn apply(kind: ModelKind, z: &HiddenState, t: f64, params: &ModelParams) -> Result<HiddenState> {
    params.expect_kind(kind)?;
    params.check_state(z)?;
    let field = ModelField::for_params(params, 1);
    let mut out = HiddenState::zeros(z.channels(), z.n());
    field.eval(&params.values, t, z.as_slice(), out.as_mut_slice());
    Ok(out)
}

/// MLP velocity at `(z, t)`.
pub fn node_field(z: &HiddenState, t: f64, params: &ModelParams) -> Result<HiddenState> {
    apply(ModelKind::Node, z, t, params)
}

/// `σ{W·z + F⁻¹[κ·F(z)]} − z`. Autonomous; `t` is accepted for symmetry.
pub fn fnde_field(z: &HiddenState, t: f64, params: &ModelParams) -> Result<HiddenState> {
    apply(ModelKind::Fnde, z, t, params)
}

/// `F⁻¹[(W + κ)·F(z)]`.
pub fn fnde_mod_field(z: &HiddenState, t: f64, params: &ModelParams) -> Result<HiddenState> {
    apply(ModelKind::FndeMod, z, t, params)
}

/// One application of `σ{W·z + F⁻¹[κ·F(z)]}`.
pub fn fno_forward(z: &HiddenState, params: &ModelParams) -> Result<HiddenState> {
    apply(ModelKind::Fno, z, 0.0, params)
}

/// Runs the model on a batch of initial states and returns the final states.
pub fn predict_batch(params: &ModelParams, z0: &[f64], batch: usize, steps: usize) -> Result<Vec<f64>> {
    let field = ModelField::for_params(params, batch);
    if z0.len() != field.state_len() {
        return Err(Error::shape(
            alloc::format!("{} reals", field.state_len()),
            alloc::format!("{}", z0.len()),
        ));
    }
    if params.kind.is_integrated() {
        let bound = Bound {
            field: &field,
            params: &params.values,
        };
        integrate(&bound, z0, TimeSpan::unit(steps))
    } else {
        let mut out = alloc::vec![0.0; z0.len()];
        field.eval(&params.values, 0.0, z0, &mut out);
        if !out.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite { t: 0.0 });
        }
        Ok(out)
    }
}

/// Final hidden state for a single initial state.
pub fn forward_state(params: &ModelParams, z0: &HiddenState, steps: usize) -> Result<HiddenState> {
    params.check_state(z0)?;
    let out = predict_batch(params, z0.as_slice(), 1, steps)?;
    HiddenState::from_raw(z0.channels(), z0.n(), out)
}

/// Predicted S-matrix (channel 0 of the final state) for a sample, with
/// the default 10 RK4 steps over `t ∈ [0, 1]`.
pub fn forward(params: &ModelParams, sample: &Sample) -> Result<ComplexMatrix> {
    let z0 = HiddenState::initial(
        &sample.grid,
        sample.config.coupling,
        sample.config.mass,
        params.momentum_scale,
    );
    Ok(forward_state(params, &z0, super::DEFAULT_STEPS)?.channel(0))
}

/// Initial states and targets for a set of samples, stacked sample-major.
#[derive(Debug, Clone)]
pub struct Batch {
    pub z0: Vec<f64>,
    pub targets: Vec<ComplexMatrix>,
    pub n: usize,
    pub channels: usize,
}

impl Batch {
    pub fn new(samples: &[Sample], momentum_scale: f64) -> Result<Self> {
        let first = samples
            .first()
            .ok_or_else(|| Error::invalid("empty sample set"))?;
        let n = first.grid.n_p;
        let mut z0 = Vec::new();
        let mut targets = Vec::with_capacity(samples.len());
        let mut channels = 0;
        for s in samples {
            if s.grid.n_p != n || s.target.shape() != (n, n) {
                return Err(Error::shape(
                    alloc::format!("{n}x{n} samples"),
                    alloc::format!("{}x{}", s.target.rows(), s.target.cols()),
                ));
            }
            let z = HiddenState::initial(&s.grid, s.config.coupling, s.config.mass, momentum_scale);
            channels = z.channels();
            z0.extend_from_slice(z.as_slice());
            targets.push(s.target.clone());
        }
        Ok(Batch {
            z0,
            targets,
            n,
            channels,
        })
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn sample_len(&self) -> usize {
        2 * self.channels * self.n * self.n
    }

    /// Channel 0 of sample `b` in a stacked final state.
    pub fn s_matrix(&self, state: &[f64], b: usize) -> ComplexMatrix {
        let nn = self.n * self.n;
        let start = b * self.sample_len();
        let z: &[crate::Complex64] = bytemuck::cast_slice(&state[start..start + 2 * nn]);
        ComplexMatrix::from_vec(self.n, self.n, z.to_vec()).expect("n² entries")
    }
}
