//! Synthetic perturbative S-matrices for three scalar theories.
//!
//! Targets are `S_fi = δ_fi + i·M(p_f, p_i)` on a momentum grid, with
//! `M = Σ_{k ≤ order} M_k`. The per-order amplitudes are a regulated
//! stand-in family that keeps the coupling-power structure of the
//! perturbative series while staying smooth and pole-free on the grid:
//!
//! * φ⁴: `M₁ = −λ`, `M₂ = λ²[B(s)+B(t)+B(u)]`, `M₃ = λ³[B(s)²+B(t)²+B(u)²]`.
//! * scalar Yukawa: `M₁ = λ²[1/(t−m²−iε) + 1/(u−m²−iε)]`.
//! * scalar QED: `M₁ = λ²[(s−u)/(t−m²−iε) + (s−t)/(u−m²−iε) + 2]`.
//!
//! For Yukawa and QED each further order multiplies by `λ²·B(s)`, so their
//! order-`k` term scales as `λ^{2k}`. The bubble is
//! `B(q) = ln((Λ² + |q|)/(m² + |q|)) / 16π²` and `ε = 0.1·m²`.
//! Kinematics are 1+1-dimensional centre-of-mass:
//! `s = 4(p_i² + m²)`, `t = −(p_f − p_i)²`, `u = −(p_f + p_i)²`.

use alloc::format;
use alloc::vec::Vec;
use core::f64::consts::PI;
use core::fmt;
use core::str::FromStr;

use crate::complex::{Complex64, ComplexMatrix};
use crate::math;
use crate::{Error, Result};

pub const DEFAULT_NP: usize = 10;
pub const DEFAULT_P_MIN: f64 = 0.0;
pub const DEFAULT_P_MAX: f64 = 2.0;
pub const DEFAULT_COUPLINGS: [f64; 4] = [0.1, 0.2, 0.3, 0.4];
pub const DEFAULT_MASSES: [f64; 4] = [0.5, 1.0, 1.5, 2.0];
/// Loop cutoff in units of the training grid's `p_max`.
pub const CUTOFF_RATIO: f64 = 10.0;
/// Upper bound on `|S_fi|` over the default box (all theories, orders 1–3,
/// default couplings and masses, `p ∈ [0, 2]`).
pub const S_ENTRY_BOUND: f64 = 40.0;

/// `n_p` momenta from `p_min` to `p_max`. `offset` shifts every point by that
/// many grid spacings, clamping at `p_max`; it is 0 for training grids and
/// 0.5 for validation grids.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentumGrid {
    pub n_p: usize,
    pub p_min: f64,
    pub p_max: f64,
    pub offset: f64,
}

impl MomentumGrid {
    pub fn new(n_p: usize, p_min: f64, p_max: f64) -> Result<Self> {
        if n_p < 2 {
            return Err(Error::invalid("momentum grid needs n_p >= 2"));
        }
        if !(p_min >= 0.0) || !(p_max > p_min) || !p_max.is_finite() {
            return Err(Error::invalid(format!(
                "momentum range needs p_max > p_min >= 0 (got {p_min}..{p_max})"
            )));
        }
        Ok(MomentumGrid {
            n_p,
            p_min,
            p_max,
            offset: 0.0,
        })
    }

    pub fn default_grid() -> Self {
        MomentumGrid::new(DEFAULT_NP, DEFAULT_P_MIN, DEFAULT_P_MAX).expect("valid default")
    }

    pub fn spacing(&self) -> f64 {
        (self.p_max - self.p_min) / (self.n_p - 1) as f64
    }

    pub fn point(&self, k: usize) -> f64 {
        (self.p_min + (k as f64 + self.offset) * self.spacing()).min(self.p_max)
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.n_p).map(|k| self.point(k)).collect()
    }

    /// Same range with points shifted by half a spacing.
    pub fn validation_grid(&self) -> Self {
        MomentumGrid {
            offset: self.offset + 0.5,
            ..*self
        }
    }

    /// `p_max ← ratio·p_max`, everything else unchanged.
    pub fn scaled(&self, ratio: f64) -> Result<Self> {
        if !(ratio >= 1.0) || !ratio.is_finite() {
            return Err(Error::invalid(format!("extrapolation ratio must be >= 1 (got {ratio})")));
        }
        Ok(MomentumGrid {
            p_max: self.p_max * ratio,
            ..*self
        })
    }
}

pub fn validation_grid(grid: &MomentumGrid) -> MomentumGrid {
    grid.validation_grid()
}

pub fn scaled_grid(grid: &MomentumGrid, ratio: f64) -> Result<MomentumGrid> {
    grid.scaled(ratio)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Theory {
    Phi4,
    ScalarYukawa,
    ScalarQed,
}

impl Theory {
    pub const ALL: [Theory; 3] = [Theory::Phi4, Theory::ScalarYukawa, Theory::ScalarQed];

    pub fn name(self) -> &'static str {
        match self {
            Theory::Phi4 => "phi4",
            Theory::ScalarYukawa => "scalar_yukawa",
            Theory::ScalarQed => "scalar_qed",
        }
    }

    /// Power of λ carried by the order-`k` term.
    pub fn coupling_power(self, order: usize) -> usize {
        match self {
            Theory::Phi4 => order,
            Theory::ScalarYukawa | Theory::ScalarQed => 2 * order,
        }
    }
}

impl fmt::Display for Theory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Theory {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "phi4" | "phi^4" => Ok(Theory::Phi4),
            "scalar_yukawa" | "yukawa" => Ok(Theory::ScalarYukawa),
            "scalar_qed" | "qed" => Ok(Theory::ScalarQed),
            other => Err(Error::invalid(format!("unknown theory `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TheoryConfig {
    pub theory: Theory,
    pub coupling: f64,
    pub mass: f64,
    pub order: usize,
    /// Loop cutoff Λ; fixed per theory instance so that evaluating on a
    /// wider grid does not change the theory.
    pub cutoff: f64,
}

impl TheoryConfig {
    /// Uses the default cutoff `Λ = 10 · 2`.
    pub fn new(theory: Theory, coupling: f64, mass: f64, order: usize) -> Result<Self> {
        Self::with_cutoff(theory, coupling, mass, order, CUTOFF_RATIO * DEFAULT_P_MAX)
    }

    pub fn with_cutoff(
        theory: Theory,
        coupling: f64,
        mass: f64,
        order: usize,
        cutoff: f64,
    ) -> Result<Self> {
        if !(coupling >= 0.0) || !coupling.is_finite() {
            return Err(Error::invalid(format!("coupling must be >= 0 (got {coupling})")));
        }
        if !(mass > 0.0) || !mass.is_finite() {
            return Err(Error::invalid(format!("mass must be > 0 (got {mass})")));
        }
        if !(1..=3).contains(&order) {
            return Err(Error::invalid(format!("order must be 1, 2 or 3 (got {order})")));
        }
        if !(cutoff > 0.0) {
            return Err(Error::invalid("cutoff must be positive"));
        }
        Ok(TheoryConfig {
            theory,
            coupling,
            mass,
            order,
            cutoff,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mandelstam {
    pub s: f64,
    pub t: f64,
    pub u: f64,
}

pub fn mandelstam(p_i: f64, p_f: f64, m: f64) -> Mandelstam {
    Mandelstam {
        s: 4.0 * (p_i * p_i + m * m),
        t: -(p_f - p_i) * (p_f - p_i),
        u: -(p_f + p_i) * (p_f + p_i),
    }
}

/// Regulated bubble `ln((Λ² + |q|)/(m² + |q|)) / 16π²`.
pub fn bubble(q: f64, mass: f64, cutoff: f64) -> f64 {
    let q = q.abs();
    math::ln((cutoff * cutoff + q) / (mass * mass + q)) / (16.0 * PI * PI)
}

/// `1/(x − iε)`
fn regulated_inverse(x: f64, eps: f64) -> Complex64 {
    let d = x * x + eps * eps;
    Complex64::new(x / d, eps / d)
}

/// The order-`k` contribution `M_k` alone (`k ∈ 1..=3`).
pub fn order_term(config: &TheoryConfig, k: usize, p_f: f64, p_i: f64) -> Complex64 {
    let lambda = config.coupling;
    let m = config.mass;
    let kin = mandelstam(p_i, p_f, m);
    let b = |q: f64| bubble(q, m, config.cutoff);
    let real = |x: f64| Complex64::new(x, 0.0);
    match config.theory {
        Theory::Phi4 => match k {
            1 => real(-lambda),
            2 => real(lambda * lambda * (b(kin.s) + b(kin.t) + b(kin.u))),
            3 => {
                let (bs, bt, bu) = (b(kin.s), b(kin.t), b(kin.u));
                real(math::powi(lambda, 3) * (bs * bs + bt * bt + bu * bu))
            }
            _ => real(0.0),
        },
        Theory::ScalarYukawa | Theory::ScalarQed => {
            if k == 0 || k > 3 {
                return real(0.0);
            }
            let eps = 0.1 * m * m;
            let prop_t = regulated_inverse(kin.t - m * m, eps);
            let prop_u = regulated_inverse(kin.u - m * m, eps);
            let base = match config.theory {
                Theory::ScalarYukawa => prop_t + prop_u,
                _ => prop_t * (kin.s - kin.u) + prop_u * (kin.s - kin.t) + 2.0,
            };
            let loop_factor = lambda * lambda * b(kin.s);
            base * (lambda * lambda) * math::powi(loop_factor, k as i32 - 1)
        }
    }
}

/// `Σ_{k ≤ order} M_k(p_f, p_i)`.
pub fn amplitude(config: &TheoryConfig, p_f: f64, p_i: f64) -> Complex64 {
    (1..=config.order)
        .map(|k| order_term(config, k, p_f, p_i))
        .sum()
}

/// `S_fi = δ_fi + i·M(p_f, p_i)`, rows indexed by `p_f`, columns by `p_i`.
pub fn s_matrix(config: &TheoryConfig, grid: &MomentumGrid) -> ComplexMatrix {
    let p = grid.points();
    let i = Complex64::new(0.0, 1.0);
    ComplexMatrix::from_fn(grid.n_p, grid.n_p, |f, c| {
        let delta = if f == c { 1.0 } else { 0.0 };
        Complex64::new(delta, 0.0) + i * amplitude(config, p[f], p[c])
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub config: TheoryConfig,
    pub grid: MomentumGrid,
    pub target: ComplexMatrix,
}

impl Sample {
    pub fn generate(config: TheoryConfig, grid: MomentumGrid) -> Self {
        Sample {
            target: s_matrix(&config, &grid),
            config,
            grid,
        }
    }
}

/// Settings a dataset was generated from.
#[derive(Debug, Clone, PartialEq)]
pub struct Provenance {
    pub theory: Theory,
    pub order: usize,
    pub grid: MomentumGrid,
    pub couplings: Vec<f64>,
    pub masses: Vec<f64>,
    pub cutoff: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub samples: Vec<Sample>,
    pub provenance: Provenance,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Same theory instances evaluated analytically on another grid.
    pub fn regenerate_on(&self, grid: MomentumGrid) -> Dataset {
        Dataset {
            samples: self
                .samples
                .iter()
                .map(|s| Sample::generate(s.config, grid))
                .collect(),
            provenance: Provenance {
                grid,
                ..self.provenance.clone()
            },
        }
    }

    /// Same configurations at another perturbative order.
    pub fn with_order(&self, order: usize) -> Result<Dataset> {
        let mut samples = Vec::with_capacity(self.samples.len());
        for s in &self.samples {
            let config = TheoryConfig::with_cutoff(
                s.config.theory,
                s.config.coupling,
                s.config.mass,
                order,
                s.config.cutoff,
            )?;
            samples.push(Sample::generate(config, s.grid));
        }
        Ok(Dataset {
            samples,
            provenance: Provenance {
                order,
                ..self.provenance.clone()
            },
        })
    }
}

/// Cartesian product of couplings × masses, coupling-major. The loop cutoff
/// is tied to the generating grid, `Λ = 10·p_max`.
pub fn generate_dataset(
    theory: Theory,
    order: usize,
    grid: MomentumGrid,
    couplings: &[f64],
    masses: &[f64],
) -> Result<Dataset> {
    if couplings.is_empty() || masses.is_empty() {
        return Err(Error::invalid("coupling and mass lists must be non-empty"));
    }
    let cutoff = CUTOFF_RATIO * grid.p_max;
    let mut samples = Vec::with_capacity(couplings.len() * masses.len());
    for &lambda in couplings {
        for &m in masses {
            let config = TheoryConfig::with_cutoff(theory, lambda, m, order, cutoff)?;
            samples.push(Sample::generate(config, grid));
        }
    }
    Ok(Dataset {
        samples,
        provenance: Provenance {
            theory,
            order,
            grid,
            couplings: couplings.to_vec(),
            masses: masses.to_vec(),
            cutoff,
        },
    })
}

/// The 16-sample default batch.
pub fn default_dataset(theory: Theory, order: usize, grid: MomentumGrid) -> Result<Dataset> {
    generate_dataset(theory, order, grid, &DEFAULT_COUPLINGS, &DEFAULT_MASSES)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(theory: Theory, lambda: f64, order: usize) -> TheoryConfig {
        TheoryConfig::new(theory, lambda, 1.0, order).unwrap()
    }

    #[test]
    fn mandelstam_threshold_and_substitution() {
        assert_eq!(mandelstam(0.0, 0.0, 1.0), Mandelstam { s: 4.0, t: 0.0, u: 0.0 });
        let k = mandelstam(1.0, 1.0, 1.0);
        assert_eq!((k.s, k.t, k.u), (8.0, 0.0, -4.0));
    }

    #[test]
    fn mandelstam_crossing() {
        let a = mandelstam(0.7, 1.3, 0.5);
        let b = mandelstam(0.7, -1.3, 0.5);
        assert_eq!((a.t, a.u), (b.u, b.t));
        assert_eq!(a.s, b.s);
    }

    #[test]
    fn free_theory_amplitude_vanishes() {
        for theory in Theory::ALL {
            for order in 1..=3 {
                assert_eq!(amplitude(&cfg(theory, 0.0, order), 0.3, 1.1), Complex64::new(0.0, 0.0));
            }
        }
    }

    #[test]
    fn phi4_first_order_is_contact_term() {
        let c = cfg(Theory::Phi4, 0.25, 1);
        for (pf, pi) in [(0.0, 0.0), (0.3, 1.9), (2.0, 0.5)] {
            assert_eq!(amplitude(&c, pf, pi), Complex64::new(-0.25, 0.0));
        }
    }

    #[test]
    fn order_terms_are_homogeneous() {
        for theory in Theory::ALL {
            for k in 1..=3 {
                let a = order_term(&cfg(theory, 0.15, 3), k, 0.4, 1.2);
                let b = order_term(&cfg(theory, 0.30, 3), k, 0.4, 1.2);
                let power = theory.coupling_power(k) as i32;
                assert!((b - a * 2f64.powi(power)).norm() <= 1e-14 * b.norm());
            }
        }
    }

    #[test]
    fn small_phi4_s_matrix() {
        let grid = MomentumGrid::new(3, 0.0, 2.0).unwrap();
        let s = s_matrix(&cfg(Theory::Phi4, 0.1, 1), &grid);
        let expect = ComplexMatrix::from_fn(3, 3, |r, c| {
            Complex64::new(if r == c { 1.0 } else { 0.0 }, -0.1)
        });
        assert!(s.sub(&expect).unwrap().max_abs() < 1e-15);
    }

    #[test]
    fn zero_coupling_gives_identity() {
        let grid = MomentumGrid::default_grid();
        for theory in Theory::ALL {
            assert_eq!(s_matrix(&cfg(theory, 0.0, 3), &grid), ComplexMatrix::identity(10));
        }
    }

    #[test]
    fn entries_bounded_on_default_box() {
        let grid = MomentumGrid::default_grid();
        for theory in Theory::ALL {
            for order in 1..=3 {
                let ds = default_dataset(theory, order, grid).unwrap();
                for s in &ds.samples {
                    assert!(s.target.is_finite());
                    assert!(s.target.max_abs() <= S_ENTRY_BOUND, "{theory} {}", s.target.max_abs());
                }
            }
        }
    }

    #[test]
    fn dataset_ordering_and_size() {
        let grid = MomentumGrid::default_grid();
        let ds = default_dataset(Theory::Phi4, 1, grid).unwrap();
        assert_eq!(ds.len(), 16);
        assert_eq!(ds.samples[0].config.coupling, 0.1);
        assert_eq!(ds.samples[1].config.coupling, 0.1);
        assert_eq!(ds.samples[1].config.mass, 1.0);
        assert_eq!(ds.samples[4].config.coupling, 0.2);
        let single = generate_dataset(Theory::Phi4, 1, grid, &[0.2], &[1.0]).unwrap();
        assert_eq!(single.len(), 1);
        assert_eq!(default_dataset(Theory::Phi4, 1, grid).unwrap(), ds);
    }

    #[test]
    fn validation_grid_points() {
        let grid = MomentumGrid::new(2, 0.0, 1.0).unwrap();
        assert_eq!(grid.validation_grid().points(), vec![0.5, 1.0]);
        assert_ne!(grid.validation_grid().validation_grid(), grid);
        assert_eq!(grid.validation_grid().validation_grid().points(), vec![1.0, 1.0]);
    }

    #[test]
    fn scaled_grid_behaviour() {
        let grid = MomentumGrid::default_grid();
        assert_eq!(grid.scaled(1.0).unwrap(), grid);
        assert_eq!(grid.scaled(2.0).unwrap().p_max, 4.0);
        assert_eq!(grid.scaled(2.0).unwrap().p_min, grid.p_min);
        assert!(grid.scaled(0.5).is_err());
    }

    #[test]
    fn invalid_configs() {
        assert!(TheoryConfig::new(Theory::Phi4, -0.1, 1.0, 1).is_err());
        assert!(TheoryConfig::new(Theory::Phi4, 0.1, 0.0, 1).is_err());
        assert!(TheoryConfig::new(Theory::Phi4, 0.1, 1.0, 4).is_err());
        assert!(MomentumGrid::new(1, 0.0, 1.0).is_err());
        assert!(MomentumGrid::new(3, 1.0, 1.0).is_err());
    }

    #[test]
    fn regenerated_validation_targets_are_analytic() {
        let grid = MomentumGrid::new(4, 0.0, 2.0).unwrap();
        let ds = default_dataset(Theory::ScalarQed, 2, grid).unwrap();
        let val = ds.regenerate_on(grid.validation_grid());
        for (a, b) in ds.samples.iter().zip(&val.samples) {
            assert_eq!(b.target, s_matrix(&a.config, &grid.validation_grid()));
        }
    }
}
