//! Fixed-step RK4 integration and reverse-mode gradients through the
//! unrolled steps.
//!
//! States are flat real vectors; complex states use the interleaved
//! `(re, im)` embedding, so every complex quantity is differentiated through
//! its real and imaginary parts.
//!
//! Gradients follow discretize-then-optimize: [`integrate_with_tape`] keeps
//! the four stage inputs of every step and [`backprop`] runs the adjoint of
//! each RK4 update in reverse, which gives the exact gradient of the discrete
//! solution.

use alloc::vec;
use alloc::vec::Vec;

use crate::{Error, Result};

/// Integration window `[t0, t1]` split into `steps` equal RK4 steps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeSpan {
    pub t0: f64,
    pub t1: f64,
    pub steps: usize,
}

impl TimeSpan {
    pub fn new(t0: f64, t1: f64, steps: usize) -> Result<Self> {
        if !(t1 > t0) || !t0.is_finite() || !t1.is_finite() {
            return Err(Error::invalid("time span needs t1 > t0"));
        }
        if steps == 0 {
            return Err(Error::invalid("time span needs at least one step"));
        }
        Ok(TimeSpan { t0, t1, steps })
    }

    /// `[0, 1]` with `steps` steps.
    pub fn unit(steps: usize) -> Self {
        TimeSpan {
            t0: 0.0,
            t1: 1.0,
            steps: steps.max(1),
        }
    }

    pub fn step_size(&self) -> f64 {
        (self.t1 - self.t0) / self.steps as f64
    }

    pub fn time_at(&self, step: usize) -> f64 {
        self.t0 + step as f64 * self.step_size()
    }
}

/// A time-dependent vector field `dz/dt = f(t, z)`.
pub trait Field {
    fn dim(&self) -> usize;
    fn eval(&self, t: f64, z: &[f64], out: &mut [f64]);
}

/// Adapter for closures.
pub struct FnField<F> {
    pub dim: usize,
    pub f: F,
}

impl<F: Fn(f64, &[f64], &mut [f64])> Field for FnField<F> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn eval(&self, t: f64, z: &[f64], out: &mut [f64]) {
        (self.f)(t, z, out)
    }
}

/// A field with a flat real parameter vector and a vector-Jacobian product.
pub trait DiffField {
    fn state_len(&self) -> usize;
    fn param_len(&self) -> usize;
    fn eval(&self, params: &[f64], t: f64, z: &[f64], out: &mut [f64]);

    /// Given the cotangent `out_bar` of `eval`'s output, overwrites `z_bar`
    /// with the state cotangent and adds the parameter cotangent into
    /// `params_bar`.
    fn vjp(
        &self,
        params: &[f64],
        t: f64,
        z: &[f64],
        out_bar: &[f64],
        z_bar: &mut [f64],
        params_bar: &mut [f64],
    );
}

/// A [`DiffField`] with its parameters fixed.
pub struct Bound<'a, F: ?Sized> {
    pub field: &'a F,
    pub params: &'a [f64],
}

impl<F: DiffField + ?Sized> Field for Bound<'_, F> {
    fn dim(&self) -> usize {
        self.field.state_len()
    }

    fn eval(&self, t: f64, z: &[f64], out: &mut [f64]) {
        self.field.eval(self.params, t, z, out)
    }
}

fn eval_checked<F: Field + ?Sized>(field: &F, t: f64, z: &[f64], out: &mut [f64]) -> Result<()> {
    field.eval(t, z, out);
    if out.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite { t })
    }
}

/// Stage inputs `u1..u4` of one RK4 step and the resulting state.
struct Stages {
    inputs: [Vec<f64>; 4],
    next: Vec<f64>,
}

fn rk4_stages<F: Field + ?Sized>(field: &F, z: &[f64], t: f64, h: f64) -> Result<Stages> {
    let n = z.len();
    let mut k = [vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]];
    let u1 = z.to_vec();
    eval_checked(field, t, &u1, &mut k[0])?;
    let u2: Vec<f64> = z.iter().zip(&k[0]).map(|(a, b)| a + 0.5 * h * b).collect();
    eval_checked(field, t + 0.5 * h, &u2, &mut k[1])?;
    let u3: Vec<f64> = z.iter().zip(&k[1]).map(|(a, b)| a + 0.5 * h * b).collect();
    eval_checked(field, t + 0.5 * h, &u3, &mut k[2])?;
    let u4: Vec<f64> = z.iter().zip(&k[2]).map(|(a, b)| a + h * b).collect();
    eval_checked(field, t + h, &u4, &mut k[3])?;

    let next: Vec<f64> = (0..n)
        .map(|i| z[i] + h / 6.0 * (k[0][i] + 2.0 * k[1][i] + 2.0 * k[2][i] + k[3][i]))
        .collect();
    if !next.iter().all(|v| v.is_finite()) {
        return Err(Error::NonFinite { t: t + h });
    }
    Ok(Stages {
        inputs: [u1, u2, u3, u4],
        next,
    })
}

/// One classical RK4 step `z + (h/6)(k1 + 2k2 + 2k3 + k4)`.
pub fn rk4_step<F: Field + ?Sized>(field: &F, z: &[f64], t: f64, h: f64) -> Result<Vec<f64>> {
    if !(h > 0.0) {
        return Err(Error::invalid("step size must be positive"));
    }
    Ok(rk4_stages(field, z, t, h)?.next)
}

/// Returns `z(t1)`.
pub fn integrate<F: Field + ?Sized>(field: &F, z0: &[f64], span: TimeSpan) -> Result<Vec<f64>> {
    let h = span.step_size();
    let mut z = z0.to_vec();
    for step in 0..span.steps {
        z = rk4_stages(field, &z, span.time_at(step), h)?.next;
    }
    Ok(z)
}

/// States at every step boundary, `z(t0)` first and `z(t1)` last.
pub fn integrate_trajectory<F: Field + ?Sized>(
    field: &F,
    z0: &[f64],
    span: TimeSpan,
) -> Result<Vec<Vec<f64>>> {
    let h = span.step_size();
    let mut out = Vec::with_capacity(span.steps + 1);
    out.push(z0.to_vec());
    for step in 0..span.steps {
        let next = rk4_stages(field, &out[step], span.time_at(step), h)?.next;
        out.push(next);
    }
    Ok(out)
}

/// Everything the reverse pass needs from a forward integration.
#[derive(Debug, Clone)]
pub struct Tape {
    span: TimeSpan,
    dim: usize,
    /// Per step, the four stage inputs laid end to end.
    stage_inputs: Vec<Vec<f64>>,
}

impl Tape {
    pub fn span(&self) -> TimeSpan {
        self.span
    }
}

pub fn integrate_with_tape<F: DiffField + ?Sized>(
    field: &F,
    params: &[f64],
    z0: &[f64],
    span: TimeSpan,
) -> Result<(Vec<f64>, Tape)> {
    let bound = Bound { field, params };
    let h = span.step_size();
    let dim = z0.len();
    let mut z = z0.to_vec();
    let mut stage_inputs = Vec::with_capacity(span.steps);
    for step in 0..span.steps {
        let stages = rk4_stages(&bound, &z, span.time_at(step), h)?;
        let mut packed = Vec::with_capacity(4 * dim);
        for u in &stages.inputs {
            packed.extend_from_slice(u);
        }
        stage_inputs.push(packed);
        z = stages.next;
    }
    Ok((
        z,
        Tape {
            span,
            dim,
            stage_inputs,
        },
    ))
}

/// Reverse pass: given `dL/dz(t1)`, returns `dL/dz(t0)` and adds `dL/dθ`
/// into `params_bar`.
pub fn backprop<F: DiffField + ?Sized>(
    field: &F,
    params: &[f64],
    tape: &Tape,
    final_bar: &[f64],
    params_bar: &mut [f64],
) -> Vec<f64> {
    let n = tape.dim;
    let h = tape.span.step_size();
    let mut z_bar = final_bar.to_vec();
    let mut u_bar = vec![0.0; n];
    let mut k_bar = [vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]];
    let weights = [h / 6.0, h / 3.0, h / 3.0, h / 6.0];
    // u_{s+1} = z + c_s·k_s for s = 1..3
    let feed = [0.5 * h, 0.5 * h, h];
    let offsets = [0.0, 0.5 * h, 0.5 * h, h];

    for step in (0..tape.span.steps).rev() {
        let t = tape.span.time_at(step);
        let inputs = &tape.stage_inputs[step];
        for (kb, w) in k_bar.iter_mut().zip(weights) {
            for (a, b) in kb.iter_mut().zip(&z_bar) {
                *a = w * b;
            }
        }
        for s in (0..4).rev() {
            let u = &inputs[s * n..(s + 1) * n];
            field.vjp(params, t + offsets[s], u, &k_bar[s], &mut u_bar, params_bar);
            for (a, b) in z_bar.iter_mut().zip(&u_bar) {
                *a += b;
            }
            if s > 0 {
                let c = feed[s - 1];
                for (a, b) in k_bar[s - 1].iter_mut().zip(&u_bar) {
                    *a += c * b;
                }
            }
        }
    }
    z_bar
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub loss: f64,
    pub params: Vec<f64>,
    pub z0: Vec<f64>,
}

/// Gradient of `loss(integrate(field, z0, span))` with respect to the
/// parameters and the initial state. `loss` returns its value and its
/// gradient with respect to the final state.
pub fn backprop_through_integration<F, L>(
    field: &F,
    params: &[f64],
    z0: &[f64],
    span: TimeSpan,
    loss: L,
) -> Result<Gradients>
where
    F: DiffField + ?Sized,
    L: FnOnce(&[f64]) -> (f64, Vec<f64>),
{
    let (z1, tape) = integrate_with_tape(field, params, z0, span)?;
    let (value, z1_bar) = loss(&z1);
    let mut params_bar = vec![0.0; params.len()];
    let z0_bar = backprop(field, params, &tape, &z1_bar, &mut params_bar);
    Ok(Gradients {
        loss: value,
        params: params_bar,
        z0: z0_bar,
    })
}

/// Relative floor for [`finite_diff_check`]: components whose gradient is
/// below this fraction of the largest one are compared absolutely against
/// that scale, since their difference quotient is pure roundoff.
pub const FD_RELATIVE_FLOOR: f64 = 1e-6;

/// Central-difference check of an analytic gradient.
///
/// Compares `analytic[i]` with `(L(θ+εe_i) − L(θ−εe_i)) / 2ε` for every
/// component and returns
/// `max_i |g_ad − g_fd| / max(|g_ad|, |g_fd|, FD_RELATIVE_FLOOR·‖g_fd‖_∞)`.
pub fn finite_diff_check<L>(mut loss: L, analytic: &[f64], params: &[f64], epsilon: f64) -> f64
where
    L: FnMut(&[f64]) -> f64,
{
    assert_eq!(analytic.len(), params.len(), "one analytic component per parameter");
    let mut theta = params.to_vec();
    let mut numeric = Vec::with_capacity(params.len());
    for i in 0..params.len() {
        theta[i] = params[i] + epsilon;
        let up = loss(&theta);
        theta[i] = params[i] - epsilon;
        let down = loss(&theta);
        theta[i] = params[i];
        numeric.push((up - down) / (2.0 * epsilon));
    }
    let scale = numeric.iter().fold(0.0f64, |m, g| m.max(g.abs()));
    let floor = FD_RELATIVE_FLOOR * scale;
    analytic
        .iter()
        .zip(&numeric)
        .map(|(&a, &f)| {
            let denom = a.abs().max(f.abs()).max(floor);
            if denom > 0.0 {
                (a - f).abs() / denom
            } else {
                0.0
            }
        })
        .fold(0.0, f64::max)
}
