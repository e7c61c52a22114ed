//! The four model families and their parameter stores.
//!
//! * `NODE`: an MLP velocity field over the flattened real hidden state,
//!   integrated with RK4.
//! * `FNDE`: `dz/dt = σ{W·z + F⁻¹[κ·F(z)]} − z`, integrated.
//! * `FNDE_MOD`: `dz/dt = F⁻¹[(W + κ)·F(z)]`, linear in `z`, integrated.
//! * `FNO`: the single spectral layer `σ{W·z + F⁻¹[κ·F(z)]}` applied once.
//!
//! All parameters live in one flat `Vec<f64>`; complex tensors are stored
//! interleaved `(re, im)`. [`ModelParams::layout`] names every segment.

mod dense;
mod forward;
mod node;
mod spectral;
mod state;

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::complex::Complex64;
use crate::math;
use crate::{Error, Result};

pub use forward::{
    fnde_field, fnde_mod_field, fno_forward, forward, forward_state, node_field, predict_batch,
    Batch, ModelField,
};
pub use state::HiddenState;

/// Hidden-state channels: S, momenta, coupling, mass.
pub const CHANNELS: usize = 4;
/// Width of both NODE hidden layers.
pub const HIDDEN: usize = 100;
/// Requested spectral cutoff per axis before clamping to the grid size.
pub const DEFAULT_MODES: usize = 32;
/// RK4 steps over `t ∈ [0, 1]`.
pub const DEFAULT_STEPS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ModelKind {
    Node,
    Fnde,
    FndeMod,
    Fno,
}

impl ModelKind {
    pub const ALL: [ModelKind; 4] = [
        ModelKind::Fnde,
        ModelKind::FndeMod,
        ModelKind::Fno,
        ModelKind::Node,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Node => "NODE",
            ModelKind::Fnde => "FNDE",
            ModelKind::FndeMod => "FNDE_MOD",
            ModelKind::Fno => "FNO",
        }
    }

    /// Whether the model output comes from integrating a field.
    pub fn is_integrated(self) -> bool {
        !matches!(self, ModelKind::Fno)
    }

    pub fn is_spectral(self) -> bool {
        !matches!(self, ModelKind::Node)
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().replace('-', "_").as_str() {
            "NODE" => Ok(ModelKind::Node),
            "FNDE" => Ok(ModelKind::Fnde),
            "FNDE_MOD" | "FNDEMOD" | "MODIFIED_FNDE" => Ok(ModelKind::FndeMod),
            "FNO" => Ok(ModelKind::Fno),
            other => Err(Error::invalid(format!("unknown model kind `{other}`"))),
        }
    }
}

/// Shapes that fix the parameter layout.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModelShape {
    pub n_p: usize,
    pub channels: usize,
    /// Retained modes per axis, already clamped to `n_p`.
    pub modes: usize,
    pub hidden: usize,
}

impl ModelShape {
    pub fn new(n_p: usize, modes: usize) -> Result<Self> {
        if n_p < 2 {
            return Err(Error::invalid("momentum grid needs n_p >= 2"));
        }
        if modes == 0 {
            return Err(Error::invalid("mode cutoff must be at least 1"));
        }
        Ok(ModelShape {
            n_p,
            channels: CHANNELS,
            modes: modes.min(n_p),
            hidden: HIDDEN,
        })
    }

    /// Real length of one sample's hidden state.
    pub fn state_len(&self) -> usize {
        2 * self.channels * self.n_p * self.n_p
    }
}

/// One named segment of the flat parameter vector.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TensorSpec {
    pub name: &'static str,
    pub dims: Vec<usize>,
    pub complex: bool,
    pub offset: usize,
}

impl TensorSpec {
    pub fn numel(&self) -> usize {
        self.dims.iter().product()
    }

    /// Number of `f64` slots occupied.
    pub fn real_len(&self) -> usize {
        self.numel() * if self.complex { 2 } else { 1 }
    }

    pub fn range(&self) -> core::ops::Range<usize> {
        self.offset..self.offset + self.real_len()
    }
}

pub(crate) fn layout_for(kind: ModelKind, shape: &ModelShape) -> Vec<TensorSpec> {
    let c = shape.channels;
    let m = shape.modes;
    let d = shape.state_len();
    let h = shape.hidden;
    let raw: Vec<(&'static str, Vec<usize>, bool)> = match kind {
        ModelKind::Node => vec![
            ("w1", vec![h, d], false),
            ("w1_t", vec![h], false),
            ("b1", vec![h], false),
            ("w2", vec![h, h], false),
            ("b2", vec![h], false),
            ("w3", vec![d, h], false),
            ("b3", vec![d], false),
        ],
        _ => vec![("w", vec![c, c], true), ("kappa", vec![c, c, m, m], true)],
    };
    let mut offset = 0;
    raw.into_iter()
        .map(|(name, dims, complex)| {
            let spec = TensorSpec {
                name,
                dims,
                complex,
                offset,
            };
            offset += spec.real_len();
            spec
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub kind: ModelKind,
    pub shape: ModelShape,
    /// Momentum used to normalize the momentum conditioning channel; set
    /// from the training grid's `p_max`.
    pub momentum_scale: f64,
    pub values: Vec<f64>,
}

impl ModelParams {
    pub fn zeros(kind: ModelKind, shape: ModelShape) -> Self {
        let len = layout_for(kind, &shape).iter().map(TensorSpec::real_len).sum();
        ModelParams {
            kind,
            shape,
            momentum_scale: crate::theory::DEFAULT_P_MAX,
            values: vec![0.0; len],
        }
    }

    pub fn layout(&self) -> Vec<TensorSpec> {
        layout_for(self.kind, &self.shape)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn spec(&self, name: &str) -> Option<TensorSpec> {
        self.layout().into_iter().find(|t| t.name == name)
    }

    pub fn tensor(&self, name: &str) -> Option<&[f64]> {
        let spec = self.spec(name)?;
        Some(&self.values[spec.range()])
    }

    pub fn tensor_mut(&mut self, name: &str) -> Option<&mut [f64]> {
        let spec = self.spec(name)?;
        Some(&mut self.values[spec.range()])
    }

    pub fn complex_tensor(&self, name: &str) -> Option<&[Complex64]> {
        let spec = self.spec(name)?;
        spec.complex.then(|| bytemuck::cast_slice(&self.values[spec.range()]))
    }

    pub fn complex_tensor_mut(&mut self, name: &str) -> Option<&mut [Complex64]> {
        let spec = self.spec(name)?;
        if !spec.complex {
            return None;
        }
        Some(bytemuck::cast_slice_mut(&mut self.values[spec.range()]))
    }

    /// Complex parameter count (Fourier kinds) or real count (NODE).
    pub fn scalar_count(&self) -> usize {
        self.layout().iter().map(TensorSpec::numel).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub(crate) fn expect_kind(&self, kind: ModelKind) -> Result<()> {
        if self.kind != kind {
            return Err(Error::WrongKind {
                expected: kind.name(),
                got: self.kind.name(),
            });
        }
        Ok(())
    }

    pub(crate) fn check_state(&self, z: &HiddenState) -> Result<()> {
        if z.n() != self.shape.n_p || z.channels() != self.shape.channels {
            return Err(Error::shape(
                format!("{} channels of {}x{}", self.shape.channels, self.shape.n_p, self.shape.n_p),
                format!("{} channels of {}x{}", z.channels(), z.n(), z.n()),
            ));
        }
        Ok(())
    }

    pub fn describe(&self) -> String {
        format!(
            "{} (n_p = {}, channels = {}, modes = {}, {} parameters)",
            self.kind,
            self.shape.n_p,
            self.shape.channels,
            self.shape.modes,
            self.len()
        )
    }
}

/// Deterministic initialization.
///
/// Dense layers (weights and biases) are uniform in `±1/√fan_in`; spectral
/// weights have real and imaginary parts uniform in `[0, 1/(C·m²))`; the
/// channel-mixing matrix `W` starts at zero.
pub fn init_params(kind: ModelKind, n_p: usize, modes: usize, seed: u64) -> Result<ModelParams> {
    let shape = ModelShape::new(n_p, modes)?;
    let mut params = ModelParams::zeros(kind, shape);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    match kind {
        ModelKind::Node => {
            let d = shape.state_len();
            let h = shape.hidden;
            // The time coordinate counts toward the first layer's fan-in.
            let bounds = [
                ("w1", d + 1),
                ("w1_t", d + 1),
                ("b1", d + 1),
                ("w2", h),
                ("b2", h),
                ("w3", h),
                ("b3", h),
            ];
            for (name, fan_in) in bounds {
                let bound = 1.0 / math::sqrt(fan_in as f64);
                for v in params.tensor_mut(name).expect("layout has tensor") {
                    *v = rng.gen_range(-bound..bound);
                }
            }
        }
        _ => {
            let scale = 1.0 / (shape.channels * shape.modes * shape.modes) as f64;
            for v in params.tensor_mut("kappa").expect("layout has tensor") {
                *v = scale * rng.gen::<f64>();
            }
        }
    }
    Ok(params)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_is_bit_identical() {
        for kind in ModelKind::ALL {
            let a = init_params(kind, 5, 32, 7).unwrap();
            let b = init_params(kind, 5, 32, 7).unwrap();
            assert_eq!(a, b);
            let c = init_params(kind, 5, 32, 8).unwrap();
            assert_ne!(a.values, c.values);
        }
    }

    #[test]
    fn node_layer_shapes_for_ten_point_grid() {
        let p = init_params(ModelKind::Node, 10, 32, 0).unwrap();
        assert_eq!(p.spec("w1").unwrap().dims, vec![100, 800]);
        assert_eq!(p.spec("w2").unwrap().dims, vec![100, 100]);
        assert_eq!(p.spec("w3").unwrap().dims, vec![800, 100]);
        assert_eq!(p.spec("b3").unwrap().dims, vec![800]);
    }

    #[test]
    fn spectral_modes_clamp_to_grid() {
        let p = init_params(ModelKind::Fnde, 10, 32, 0).unwrap();
        assert_eq!(p.shape.modes, 10);
        assert_eq!(p.spec("kappa").unwrap().dims, vec![4, 4, 10, 10]);
    }

    #[test]
    fn fnde_parameter_count() {
        let p = init_params(ModelKind::Fnde, 10, 10, 0).unwrap();
        assert_eq!(p.complex_tensor("w").unwrap().len(), 16);
        assert_eq!(p.complex_tensor("kappa").unwrap().len(), 16 * 10 * 10);
        assert_eq!(p.scalar_count(), 16 + 1600);
        assert_eq!(p.len(), 2 * (16 + 1600));
    }

    #[test]
    fn init_ranges() {
        let p = init_params(ModelKind::Fnde, 6, 4, 1).unwrap();
        assert!(p.tensor("w").unwrap().iter().all(|&v| v == 0.0));
        let scale = 1.0 / (4.0 * 16.0);
        assert!(p.tensor("kappa").unwrap().iter().all(|&v| (0.0..scale).contains(&v)));

        let p = init_params(ModelKind::Node, 4, 4, 1).unwrap();
        let bound = 1.0 / (129.0f64).sqrt();
        assert!(p.tensor("w1").unwrap().iter().all(|v| v.abs() <= bound));
        assert!(p.tensor("w3").unwrap().iter().all(|v| v.abs() <= 0.1));
    }

    #[test]
    fn kind_parsing() {
        for kind in ModelKind::ALL {
            assert_eq!(kind.name().parse::<ModelKind>().unwrap(), kind);
        }
        assert_eq!("fnde-mod".parse::<ModelKind>().unwrap(), ModelKind::FndeMod);
        assert!("mlp".parse::<ModelKind>().is_err());
    }

    #[test]
    fn invalid_shapes() {
        assert!(init_params(ModelKind::Fnde, 1, 4, 0).is_err());
        assert!(init_params(ModelKind::Fnde, 4, 0, 0).is_err());
    }
}
