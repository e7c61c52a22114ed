//! Reading physics back out of trained parameters.
//!
//! A NODE defines `dS/dt = R(z, t)` on channel 0. With `dS/dt = (1/i)·H·S`,
//! the interaction Hamiltonian at time `T` is `H = i·R·S⁻¹`.
//!
//! The modified FNDE's channel-0 self-map is a 2-D circular convolution with
//! spectral multiplier `A = W₀₀ + κ₀₀`. The density kernel is
//! `H̄_fi = A_fi·e^{+i(π/2 + p_f·x_f + p_i·x_i)}` on the DFT-conjugate
//! position lattice `x_j = 2πj/(n_p·Δp)`, truncated to its first
//! `⌊n_p/2⌋ + 1` columns.

use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::circulant::circulant_extract;
use crate::complex::{cis, Complex64, ComplexMatrix};
use crate::fft::dft2;
use crate::linalg::mat_inverse;
use crate::models::{fnde_mod_field, node_field, forward_state, HiddenState, ModelKind, ModelParams, DEFAULT_STEPS};
use crate::ode::{integrate, Bound, TimeSpan};
use crate::models::ModelField;
use crate::theory::{MomentumGrid, Sample};
use crate::{Error, Result};

const I: Complex64 = Complex64::new(0.0, 1.0);

#[derive(Debug, Clone, PartialEq)]
pub struct HamiltonianMatrix {
    pub h: ComplexMatrix,
    pub time: f64,
    pub coupling: f64,
    pub mass: f64,
}

/// `H = i·R·S⁻¹`.
pub fn hamiltonian_from_field(field_output: &ComplexMatrix, s: &ComplexMatrix) -> Result<ComplexMatrix> {
    let s_inv = mat_inverse(s)?;
    Ok(field_output.matmul(&s_inv)?.scale(I))
}

/// `‖R − (1/i)·H·S‖_F / ‖R‖_F`; the absolute residual when `R = 0`.
pub fn self_consistency(h: &ComplexMatrix, s: &ComplexMatrix, field_output: &ComplexMatrix) -> Result<f64> {
    let predicted = h.matmul(s)?.scale(-I);
    let residual = field_output.sub(&predicted)?.frobenius_norm();
    let norm = field_output.frobenius_norm();
    Ok(if norm > 0.0 { residual / norm } else { residual })
}

/// `S(T)` and `R(z(T), T)` (channel 0 of the state and of the field) for a
/// NODE integrated from 0 to `T` with the default step count.
pub fn node_state_at(params: &ModelParams, sample: &Sample, time: f64) -> Result<(ComplexMatrix, ComplexMatrix)> {
    params.expect_kind(ModelKind::Node)?;
    if !(time > 0.0) || !time.is_finite() {
        return Err(Error::invalid("extraction time must be positive"));
    }
    let z0 = HiddenState::initial(&sample.grid, sample.config.coupling, sample.config.mass, params.momentum_scale);
    let z_t = if time == 1.0 {
        forward_state(params, &z0, DEFAULT_STEPS)?
    } else {
        params.check_state(&z0)?;
        let field = ModelField::for_params(params, 1);
        let bound = Bound {
            field: &field,
            params: &params.values,
        };
        let out = integrate(&bound, z0.as_slice(), TimeSpan::new(0.0, time, DEFAULT_STEPS)?)?;
        HiddenState::from_raw(z0.channels(), z0.n(), out)?
    };
    let r = node_field(&z_t, time, params)?;
    Ok((z_t.channel(0), r.channel(0)))
}

pub fn extract_hamiltonian(params: &ModelParams, sample: &Sample, time: f64) -> Result<HamiltonianMatrix> {
    let (s, r) = node_state_at(params, sample, time)?;
    Ok(HamiltonianMatrix {
        h: hamiltonian_from_field(&r, &s)?,
        time,
        coupling: sample.config.coupling,
        mass: sample.config.mass,
    })
}

/// `x_j = 2πj/(n_p·Δp)`.
pub fn position_grid(grid: &MomentumGrid) -> Vec<f64> {
    let scale = 2.0 * PI / (grid.n_p as f64 * grid.spacing());
    (0..grid.n_p).map(|j| scale * j as f64).collect()
}

/// `e^{sign·i(π/2 + p_f·x_f + p_i·x_i)}` for every `(f, i)`.
fn phase(grid: &MomentumGrid, sign: f64) -> ComplexMatrix {
    let p = grid.points();
    let x = position_grid(grid);
    ComplexMatrix::from_fn(grid.n_p, grid.n_p, |f, i| {
        cis(sign * (PI / 2.0 + p[f] * x[f] + p[i] * x[i]))
    })
}

/// `e^{+i(π/2 + p·x)}`, mapping the spectral multiplier to the density.
pub fn density_phase(grid: &MomentumGrid) -> ComplexMatrix {
    phase(grid, 1.0)
}

/// `e^{−i(π/2 + p·x)}`, mapping the density to the spectral multiplier.
pub fn spectral_phase(grid: &MomentumGrid) -> ComplexMatrix {
    phase(grid, -1.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DensityKernel {
    /// `n_p × (⌊n_p/2⌋ + 1)`.
    pub kernel: ComplexMatrix,
    pub positions: Vec<f64>,
}

pub fn density_columns(n_p: usize) -> usize {
    n_p / 2 + 1
}

/// Density kernel of an explicit `n² × n²` channel-0 operator. Fails with a
/// structure error when the operator is not a circular convolution.
pub fn extract_density_from_operator(operator: &ComplexMatrix, grid: &MomentumGrid) -> Result<DensityKernel> {
    let n = grid.n_p;
    if operator.shape() != (n * n, n * n) {
        return Err(Error::shape(
            alloc::format!("{0}x{0} operator", n * n),
            alloc::format!("{}x{}", operator.rows(), operator.cols()),
        ));
    }
    let kernel = circulant_extract(operator, (n, n))?;
    let multiplier = dft2(&kernel);
    let density = multiplier.zip_map(&density_phase(grid), |a, b| a * b)?;
    Ok(DensityKernel {
        kernel: density.block(0, 0, n, density_columns(n)),
        positions: position_grid(grid),
    })
}

/// The channel-0 → channel-0 block of the modified FNDE's linear map, as an
/// explicit `n² × n²` matrix (column `j` is the response to the unit
/// input at flattened position `j`).
pub fn channel0_operator(params: &ModelParams) -> Result<ComplexMatrix> {
    params.expect_kind(ModelKind::FndeMod)?;
    let n = params.shape.n_p;
    let nn = n * n;
    let mut operator = ComplexMatrix::zeros(nn, nn);
    let mut probe = HiddenState::zeros(params.shape.channels, n);
    for j in 0..nn {
        probe.as_mut_slice().fill(0.0);
        probe.as_mut_slice()[2 * j] = 1.0;
        let response = fnde_mod_field(&probe, 0.0, params)?;
        for (row, v) in response.as_complex()[..nn].iter().enumerate() {
            operator[(row, j)] = *v;
        }
    }
    Ok(operator)
}

pub fn extract_density(params: &ModelParams, grid: &MomentumGrid) -> Result<DensityKernel> {
    params.expect_kind(ModelKind::FndeMod)?;
    if grid.n_p != params.shape.n_p {
        return Err(Error::shape(
            alloc::format!("grid with n_p = {}", params.shape.n_p),
            alloc::format!("n_p = {}", grid.n_p),
        ));
    }
    extract_density_from_operator(&channel0_operator(params)?, grid)
}

/// Parameters whose channel-0 self-map realizes the full `n_p × n_p`
/// density `h_bar`: `κ₀₀ = h_bar·e^{−i(π/2 + p·x)}` with `W = 0`. Requires
/// every mode to be retained.
pub fn plant_density(h_bar: &ComplexMatrix, grid: &MomentumGrid) -> Result<ModelParams> {
    let n = grid.n_p;
    if h_bar.shape() != (n, n) {
        return Err(Error::shape(alloc::format!("{n}x{n} density"), alloc::format!("{}x{}", h_bar.rows(), h_bar.cols())));
    }
    let shape = crate::models::ModelShape::new(n, n)?;
    if shape.modes != n {
        return Err(Error::invalid("planting needs all modes retained"));
    }
    let mut params = ModelParams::zeros(ModelKind::FndeMod, shape);
    let multiplier = h_bar.zip_map(&spectral_phase(grid), |a, b| a * b)?;
    let kappa = params.complex_tensor_mut("kappa").expect("spectral layout");
    // All modes retained, so local indices coincide with global ones.
    kappa[..n * n].copy_from_slice(multiplier.as_slice());
    Ok(params)
}
