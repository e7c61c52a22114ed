//! Full-batch Adam training of the four model kinds on S-matrix datasets.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::complex::ComplexMatrix;
use crate::models::{init_params, predict_batch, Batch, ModelField, ModelKind, ModelParams, DEFAULT_MODES};
use crate::ode::{backprop, integrate_with_tape, DiffField, TimeSpan};
use crate::theory::Dataset;
use crate::{math, Error, Result};

pub const BETA1: f64 = 0.9;
pub const BETA2: f64 = 0.999;
pub const ADAM_EPSILON: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub lr0: f64,
    /// Epochs at which the learning rate halves.
    pub lr_drops: Vec<usize>,
    /// Upper bound on samples per step; every step uses the whole dataset.
    pub batch: usize,
    /// RK4 steps over `t ∈ [0, 1]`.
    pub steps: usize,
    pub seeds: usize,
    /// Retained Fourier modes per axis for the spectral kinds.
    pub modes: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 400,
            lr0: 0.02,
            lr_drops: vec![100, 250],
            batch: 16,
            steps: 10,
            seeds: 5,
            modes: DEFAULT_MODES,
        }
    }
}

impl TrainConfig {
    /// Drops at or beyond `epochs` are allowed only when `epochs` is 0, so
    /// that a zero-epoch run keeps the default schedule.
    pub fn validate(&self) -> Result<()> {
        if !(self.lr0 > 0.0) || !self.lr0.is_finite() {
            return Err(Error::invalid(format!("lr0 must be > 0 (got {})", self.lr0)));
        }
        if self.lr_drops.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid("lr_drops must be strictly increasing"));
        }
        if self.epochs > 0 && self.lr_drops.iter().any(|&d| d >= self.epochs) {
            return Err(Error::invalid(format!(
                "lr_drops {:?} must lie below epochs = {}",
                self.lr_drops, self.epochs
            )));
        }
        if self.batch == 0 || self.steps == 0 || self.modes == 0 {
            return Err(Error::invalid("batch, steps and modes must be >= 1"));
        }
        Ok(())
    }

    /// The same schedule shape stretched to a different epoch budget.
    pub fn with_epochs(&self, epochs: usize) -> Self {
        let scale = |d: usize| d * epochs / self.epochs.max(1);
        let mut lr_drops: Vec<usize> = self.lr_drops.iter().map(|&d| scale(d)).collect();
        lr_drops.dedup();
        lr_drops.retain(|&d| d > 0 && d < epochs);
        TrainConfig {
            epochs,
            lr_drops,
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct LossHistory {
    pub train: Vec<f64>,
    pub val: Vec<f64>,
}

impl LossHistory {
    pub fn len(&self) -> usize {
        self.train.len()
    }

    pub fn is_empty(&self) -> bool {
        self.train.is_empty()
    }

    pub fn final_train(&self) -> Option<f64> {
        self.train.last().copied()
    }

    pub fn final_val(&self) -> Option<f64> {
        self.val.last().copied()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub step: u64,
}

impl AdamState {
    pub fn new(len: usize) -> Self {
        AdamState {
            m: vec![0.0; len],
            v: vec![0.0; len],
            step: 0,
        }
    }
}

/// Mean of `|pred − target|²` over entries.
pub fn mse_loss(pred: &ComplexMatrix, target: &ComplexMatrix) -> Result<f64> {
    let diff = pred.sub(target)?;
    let n = diff.as_slice().len().max(1);
    Ok(diff.as_slice().iter().map(|d| d.norm_sqr()).sum::<f64>() / n as f64)
}

/// [`mse_loss`] averaged over paired predictions and targets.
pub fn batch_mse(preds: &[ComplexMatrix], targets: &[ComplexMatrix]) -> Result<f64> {
    if preds.len() != targets.len() || preds.is_empty() {
        return Err(Error::shape(
            format!("{} predictions", targets.len()),
            format!("{}", preds.len()),
        ));
    }
    let mut total = 0.0;
    for (p, t) in preds.iter().zip(targets) {
        total += mse_loss(p, t)?;
    }
    Ok(total / preds.len() as f64)
}

/// `lr0 · 2^{−(number of drops ≤ epoch)}`.
pub fn lr_at(epoch: usize, config: &TrainConfig) -> f64 {
    let drops = config.lr_drops.iter().filter(|&&d| d <= epoch).count();
    config.lr0 * math::powi(0.5, drops as i32)
}

/// One bias-corrected Adam step. Complex parameters are stored as real
/// pairs, so they update componentwise.
pub fn adam_update(params: &mut [f64], grads: &[f64], state: &mut AdamState, lr: f64) -> Result<()> {
    if params.len() != grads.len() || params.len() != state.m.len() || params.len() != state.v.len() {
        return Err(Error::shape(
            format!("{} gradient and moment entries", params.len()),
            format!("{} / {} / {}", grads.len(), state.m.len(), state.v.len()),
        ));
    }
    if !grads.iter().all(|g| g.is_finite()) {
        return Err(Error::NonFinite { t: f64::NAN });
    }
    state.step += 1;
    let c1 = 1.0 - math::powi(BETA1, state.step as i32);
    let c2 = 1.0 - math::powi(BETA2, state.step as i32);
    for (((p, &g), m), v) in params
        .iter_mut()
        .zip(grads)
        .zip(state.m.iter_mut())
        .zip(state.v.iter_mut())
    {
        *m = BETA1 * *m + (1.0 - BETA1) * g;
        *v = BETA2 * *v + (1.0 - BETA2) * g * g;
        let m_hat = *m / c1;
        let v_hat = *v / c2;
        *p -= lr * m_hat / (math::sqrt(v_hat) + ADAM_EPSILON);
    }
    Ok(())
}

/// Batch MSE of the channel-0 block against the targets, with its gradient
/// with respect to the stacked final state.
fn state_loss(batch: &Batch, state: &[f64]) -> (f64, Vec<f64>) {
    let nn = batch.n * batch.n;
    let scale = 1.0 / (batch.len() * nn) as f64;
    let mut grad = vec![0.0; state.len()];
    let mut loss = 0.0;
    for (b, target) in batch.targets.iter().enumerate() {
        let start = b * batch.sample_len();
        for (k, t) in target.as_slice().iter().enumerate() {
            let dr = state[start + 2 * k] - t.re;
            let di = state[start + 2 * k + 1] - t.im;
            loss += dr * dr + di * di;
            grad[start + 2 * k] = 2.0 * scale * dr;
            grad[start + 2 * k + 1] = 2.0 * scale * di;
        }
    }
    (loss * scale, grad)
}

/// Training loss and its parameter gradient, by reverse-mode differentiation
/// through the RK4 solve (or through the single layer for FNO).
pub fn loss_and_grad(params: &ModelParams, batch: &Batch, steps: usize) -> Result<(f64, Vec<f64>)> {
    let field = ModelField::for_params(params, batch.len());
    if batch.z0.len() != field.state_len() {
        return Err(Error::shape(
            format!("{} reals of initial state", field.state_len()),
            format!("{}", batch.z0.len()),
        ));
    }
    let mut grad = vec![0.0; params.len()];
    if params.kind.is_integrated() {
        let (z1, tape) = integrate_with_tape(&field, &params.values, &batch.z0, TimeSpan::unit(steps))?;
        let (loss, z1_bar) = state_loss(batch, &z1);
        backprop(&field, &params.values, &tape, &z1_bar, &mut grad);
        Ok((loss, grad))
    } else {
        let mut out = vec![0.0; batch.z0.len()];
        field.eval(&params.values, 0.0, &batch.z0, &mut out);
        let (loss, out_bar) = state_loss(batch, &out);
        let mut z_bar = vec![0.0; batch.z0.len()];
        field.vjp(&params.values, 0.0, &batch.z0, &out_bar, &mut z_bar, &mut grad);
        Ok((loss, grad))
    }
}

/// Training loss alone, without the reverse pass.
pub fn batch_loss(params: &ModelParams, batch: &Batch, steps: usize) -> Result<f64> {
    let out = predict_batch(params, &batch.z0, batch.len(), steps)?;
    Ok(state_loss(batch, &out).0)
}

/// Predicted S-matrices for every sample of a dataset.
pub fn predict(params: &ModelParams, dataset: &Dataset, steps: usize) -> Result<Vec<ComplexMatrix>> {
    let batch = Batch::new(&dataset.samples, params.momentum_scale)?;
    let out = predict_batch(params, &batch.z0, batch.len(), steps)?;
    Ok((0..batch.len()).map(|b| batch.s_matrix(&out, b)).collect())
}

/// Batch MSE of the model on a dataset.
pub fn evaluate(params: &ModelParams, dataset: &Dataset, steps: usize) -> Result<f64> {
    batch_loss(params, &Batch::new(&dataset.samples, params.momentum_scale)?, steps)
}

/// MSE normalized by the mean squared target modulus.
pub fn fractional_loss(params: &ModelParams, dataset: &Dataset, steps: usize) -> Result<f64> {
    let mse = evaluate(params, dataset, steps)?;
    let (sum, count) = dataset.samples.iter().fold((0.0, 0usize), |(s, c), sample| {
        let t = sample.target.as_slice();
        (s + t.iter().map(|v| v.norm_sqr()).sum::<f64>(), c + t.len())
    });
    Ok(mse / (sum / count.max(1) as f64))
}

fn check_datasets(dataset: &Dataset, val: &Dataset, config: &TrainConfig) -> Result<()> {
    config.validate()?;
    if dataset.is_empty() || val.is_empty() {
        return Err(Error::invalid("training and validation datasets must be non-empty"));
    }
    if dataset.len() > config.batch {
        return Err(Error::invalid(format!(
            "dataset of {} samples exceeds the full batch of {}",
            dataset.len(),
            config.batch
        )));
    }
    let n = dataset.samples[0].grid.n_p;
    if val.samples.iter().chain(&dataset.samples).any(|s| s.grid.n_p != n) {
        return Err(Error::invalid("all samples must share one grid size"));
    }
    Ok(())
}

/// Trains a freshly initialized model.
///
/// The model's momentum scale is the training grid's `p_max`. Each epoch
/// records training and validation loss at the current parameters, then
/// takes one full-batch Adam step.
pub fn train(
    kind: ModelKind,
    dataset: &Dataset,
    val: &Dataset,
    config: &TrainConfig,
    seed: u64,
) -> Result<(ModelParams, LossHistory)> {
    check_datasets(dataset, val, config)?;
    let mut params = init_params(kind, dataset.samples[0].grid.n_p, config.modes, seed)?;
    params.momentum_scale = dataset.provenance.grid.p_max;
    train_from(params, dataset, val, config)
}

/// Continues training from given parameters.
pub fn train_from(
    mut params: ModelParams,
    dataset: &Dataset,
    val: &Dataset,
    config: &TrainConfig,
) -> Result<(ModelParams, LossHistory)> {
    check_datasets(dataset, val, config)?;
    let batch = Batch::new(&dataset.samples, params.momentum_scale)?;
    let val_batch = Batch::new(&val.samples, params.momentum_scale)?;
    let mut state = AdamState::new(params.len());
    let mut history = LossHistory {
        train: Vec::with_capacity(config.epochs),
        val: Vec::with_capacity(config.epochs),
    };
    for epoch in 0..config.epochs {
        let (loss, grad) = loss_and_grad(&params, &batch, config.steps)
            .map_err(|_| Error::Diverged { epoch, loss: f64::NAN })?;
        let val_out = predict_batch(&params, &val_batch.z0, val_batch.len(), config.steps)
            .map_err(|_| Error::Diverged { epoch, loss: f64::NAN })?;
        let val_loss = state_loss(&val_batch, &val_out).0;
        if !loss.is_finite() || !val_loss.is_finite() || !grad.iter().all(|g| g.is_finite()) {
            return Err(Error::Diverged { epoch, loss });
        }
        history.train.push(loss);
        history.val.push(val_loss);
        adam_update(&mut params.values, &grad, &mut state, lr_at(epoch, config))?;
    }
    Ok((params, history))
}

/// Elementwise mean and envelope of several loss histories.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub mean: LossHistory,
    pub min: LossHistory,
    pub max: LossHistory,
    pub runs: Vec<LossHistory>,
}

impl RunSummary {
    pub fn from_runs(runs: Vec<LossHistory>) -> Result<Self> {
        let first = runs.first().ok_or_else(|| Error::invalid("no runs to summarize"))?;
        let len = first.len();
        if runs.iter().any(|r| r.train.len() != len || r.val.len() != len) {
            return Err(Error::invalid("runs have differing history lengths"));
        }
        let reduce = |pick: fn(&LossHistory) -> &Vec<f64>, op: fn(&[f64]) -> f64| -> Vec<f64> {
            (0..len)
                .map(|e| {
                    let column: Vec<f64> = runs.iter().map(|r| pick(r)[e]).collect();
                    op(&column)
                })
                .collect()
        };
        let mean = |xs: &[f64]| xs.iter().sum::<f64>() / xs.len() as f64;
        let min = |xs: &[f64]| xs.iter().copied().fold(f64::INFINITY, f64::min);
        let max = |xs: &[f64]| xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        fn train(h: &LossHistory) -> &Vec<f64> {
            &h.train
        }
        fn val(h: &LossHistory) -> &Vec<f64> {
            &h.val
        }
        Ok(RunSummary {
            mean: LossHistory {
                train: reduce(train, mean),
                val: reduce(val, mean),
            },
            min: LossHistory {
                train: reduce(train, min),
                val: reduce(val, min),
            },
            max: LossHistory {
                train: reduce(train, max),
                val: reduce(val, max),
            },
            runs,
        })
    }
}

/// Trains with seeds `0..config.seeds` and summarizes the histories.
pub fn repeat_runs(kind: ModelKind, dataset: &Dataset, val: &Dataset, config: &TrainConfig) -> Result<RunSummary> {
    if config.seeds == 0 {
        return Err(Error::invalid("seeds must be >= 1"));
    }
    let mut runs = Vec::with_capacity(config.seeds);
    for seed in 0..config.seeds as u64 {
        runs.push(train(kind, dataset, val, config, seed)?.1);
    }
    RunSummary::from_runs(runs)
}
