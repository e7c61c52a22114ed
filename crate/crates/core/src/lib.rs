//! Neural differential equation models that learn discretized scattering
//! matrices, together with everything they are built from: complex dense
//! linear algebra and 2-D DFTs, a fixed-step RK4 engine with reverse-mode
//! gradients through the unrolled steps, synthetic perturbative targets,
//! an Adam training harness, and recovery of the interaction Hamiltonian
//! from trained parameters.
//!
//! The crate is `no_std` with `alloc`. Enable either the default `std`
//! feature or `libm` for the floating-point intrinsics.
#![cfg_attr(not(feature = "std"), no_std)]

#[cfg(not(any(feature = "std", feature = "libm")))]
compile_error!("fnde-core needs either the `std` or the `libm` feature for float math");

extern crate alloc;

pub mod circulant;
pub mod complex;
mod error;
pub mod extraction;
pub mod fft;
pub mod linalg;
mod math;
pub mod models;
pub mod ode;
pub mod theory;
pub mod training;

pub use complex::{Complex64, ComplexMatrix, ComplexSpectrum};
pub use error::{Error, Result};
pub use models::{HiddenState, ModelKind, ModelParams, ModelShape};
pub use theory::{Dataset, MomentumGrid, Sample, Theory, TheoryConfig};
pub use training::{LossHistory, TrainConfig};
