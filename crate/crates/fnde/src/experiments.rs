//! The five experiment sweeps.
//!
//! Each sweep expands into independent (model, theory, order, n_p, seed)
//! training jobs. Jobs run on a small worker pool and their results are
//! merged in job order, so reports do not depend on scheduling.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use fnde_core::theory::{generate_dataset, DEFAULT_COUPLINGS, DEFAULT_MASSES, DEFAULT_NP, DEFAULT_P_MAX, DEFAULT_P_MIN};
use fnde_core::training::{fractional_loss, train, LossHistory};
use fnde_core::{Dataset, ModelKind, ModelParams, MomentumGrid, Theory, TrainConfig};

use crate::dataset::provenance_hash;
use crate::error::{Error, Result};
use crate::report::{ExperimentReport, ExtrapolationRow, FailureRecord, RunRecord};

pub const SMOKE_NP: usize = 6;
pub const SMOKE_DISCRETIZATION_SIZES: [usize; 3] = [6, 8, 10];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ExperimentName {
    Convergence,
    Validation,
    HigherOrder,
    Extrapolation,
    Discretization,
}

impl ExperimentName {
    pub const ALL: [ExperimentName; 5] = [
        ExperimentName::Convergence,
        ExperimentName::Validation,
        ExperimentName::HigherOrder,
        ExperimentName::Extrapolation,
        ExperimentName::Discretization,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentName::Convergence => "convergence",
            ExperimentName::Validation => "validation",
            ExperimentName::HigherOrder => "higher_order",
            ExperimentName::Extrapolation => "extrapolation",
            ExperimentName::Discretization => "discretization",
        }
    }
}

impl fmt::Display for ExperimentName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExperimentName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ExperimentName::ALL
            .into_iter()
            .find(|n| n.name() == s.replace('-', "_"))
            .ok_or_else(|| Error::Config(format!("unknown experiment `{s}`")))
    }
}

/// `{1.0, 1.1, …, ratio_max}`.
pub fn ratio_sweep(ratio_max: f64) -> Vec<f64> {
    let steps = ((ratio_max - 1.0) * 10.0 + 1e-9).floor().max(0.0) as usize;
    (0..=steps).map(|k| 1.0 + k as f64 / 10.0).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub name: ExperimentName,
    pub models: Vec<ModelKind>,
    pub theories: Vec<Theory>,
    pub orders: Vec<usize>,
    /// Grid sizes to train on; one entry except for discretization.
    pub grid_sizes: Vec<usize>,
    pub p_min: f64,
    pub p_max: f64,
    pub couplings: Vec<f64>,
    pub masses: Vec<f64>,
    /// Validation grid offset in spacings; 0 evaluates on the training grid.
    pub val_offset: f64,
    pub ratios: Vec<f64>,
    pub train: TrainConfig,
    /// Worker threads; independent runs execute concurrently.
    pub threads: usize,
}

impl ExperimentSpec {
    /// The full protocol for `name`.
    pub fn new(name: ExperimentName) -> Self {
        let (theories, orders, grid_sizes) = match name {
            ExperimentName::Convergence => (Theory::ALL.to_vec(), vec![1], vec![DEFAULT_NP]),
            ExperimentName::HigherOrder => (vec![Theory::Phi4], vec![2, 3], vec![DEFAULT_NP]),
            ExperimentName::Discretization => (vec![Theory::Phi4], vec![1], vec![10, 20, 50]),
            ExperimentName::Validation | ExperimentName::Extrapolation => {
                (vec![Theory::Phi4], vec![1], vec![DEFAULT_NP])
            }
        };
        let ratios = match name {
            ExperimentName::Extrapolation => ratio_sweep(2.0),
            _ => Vec::new(),
        };
        ExperimentSpec {
            name,
            models: ModelKind::ALL.to_vec(),
            theories,
            orders,
            grid_sizes,
            p_min: DEFAULT_P_MIN,
            p_max: DEFAULT_P_MAX,
            couplings: DEFAULT_COUPLINGS.to_vec(),
            masses: DEFAULT_MASSES.to_vec(),
            val_offset: 0.5,
            ratios,
            train: TrainConfig::default(),
            threads: std::thread::available_parallelism().map_or(1, |n| n.get()),
        }
    }

    /// CI scale: 10 epochs, one seed, `n_p = 6`; the discretization sweep
    /// keeps three sizes, `{6, 8, 10}`.
    pub fn smoke(name: ExperimentName) -> Self {
        let mut spec = ExperimentSpec::new(name);
        spec.train = spec.train.with_epochs(10);
        spec.train.seeds = 1;
        spec.grid_sizes = match name {
            ExperimentName::Discretization => SMOKE_DISCRETIZATION_SIZES.to_vec(),
            _ => vec![SMOKE_NP],
        };
        spec
    }

    pub fn validate(&self) -> Result<()> {
        self.train.validate()?;
        let missing = |what: &str| Err(Error::Config(format!("{} needs at least one {what}", self.name)));
        if self.models.is_empty() {
            return missing("model");
        }
        if self.theories.is_empty() {
            return missing("theory");
        }
        if self.orders.is_empty() {
            return missing("order");
        }
        if self.grid_sizes.is_empty() {
            return missing("grid size");
        }
        if self.train.seeds == 0 {
            return missing("seed");
        }
        if self.couplings.is_empty() || self.masses.is_empty() {
            return missing("coupling and mass");
        }
        if let Some(&n) = self.grid_sizes.iter().find(|&&n| n < 2) {
            return Err(Error::Config(format!("grid size {n} is below 2")));
        }
        if self.orders.iter().any(|o| !(1..=3).contains(o)) {
            return Err(Error::Config("orders must lie in 1..=3".into()));
        }
        match self.name {
            ExperimentName::HigherOrder if self.theories != [Theory::Phi4] => {
                Err(Error::Config("higher_order runs on phi4 only".into()))
            }
            ExperimentName::Extrapolation if self.ratios.is_empty() => missing("extrapolation ratio"),
            ExperimentName::Extrapolation if self.ratios.iter().any(|r| !(*r >= 1.0)) => {
                Err(Error::Config("extrapolation ratios must be >= 1".into()))
            }
            _ => Ok(()),
        }
    }

    pub fn grid(&self, n_p: usize) -> Result<MomentumGrid> {
        Ok(MomentumGrid::new(n_p, self.p_min, self.p_max)?)
    }

    /// Number of training runs the sweep performs.
    pub fn run_count(&self) -> usize {
        self.models.len() * self.theories.len() * self.orders.len() * self.grid_sizes.len() * self.train.seeds
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Job {
    model: ModelKind,
    theory: Theory,
    order: usize,
    n_p: usize,
    seed: u64,
}

struct DataPair {
    train: Dataset,
    val: Dataset,
}

type JobOutcome = std::result::Result<(ModelParams, LossHistory, Vec<ExtrapolationRow>), String>;

/// Runs `work` on every item with up to `threads` workers; results come back
/// in input order.
pub fn run_parallel<T, R, F>(items: &[T], threads: usize, work: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync,
{
    let threads = threads.clamp(1, items.len().max(1));
    if threads == 1 {
        return items.iter().map(&work).collect();
    }
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<R>>> = Mutex::new((0..items.len()).map(|_| None).collect());
    std::thread::scope(|scope| {
        for _ in 0..threads {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= items.len() {
                    break;
                }
                let result = work(&items[i]);
                slots.lock().expect("no worker panicked")[i] = Some(result);
            });
        }
    });
    slots
        .into_inner()
        .expect("no worker panicked")
        .into_iter()
        .map(|r| r.expect("every job ran"))
        .collect()
}

fn dataset_label(theory: Theory, order: usize, n_p: usize, split: &str) -> String {
    format!("{theory}/order{order}/np{n_p}/{split}")
}

/// Expands the spec into jobs, trains them, and assembles the report.
/// Divergent runs are recorded as failures; the sweep continues.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentReport> {
    spec.validate()?;
    let started = Instant::now();

    let mut datasets: BTreeMap<(Theory, usize, usize), DataPair> = BTreeMap::new();
    let mut provenance = BTreeMap::new();
    for &theory in &spec.theories {
        for &order in &spec.orders {
            for &n_p in &spec.grid_sizes {
                let grid = spec.grid(n_p)?;
                let train_set = generate_dataset(theory, order, grid, &spec.couplings, &spec.masses)?;
                let mut val_grid = grid;
                val_grid.offset += spec.val_offset;
                let val_set = train_set.regenerate_on(val_grid);
                provenance.insert(dataset_label(theory, order, n_p, "train"), provenance_hash(&train_set));
                provenance.insert(dataset_label(theory, order, n_p, "val"), provenance_hash(&val_set));
                datasets.insert(
                    (theory, order, n_p),
                    DataPair {
                        train: train_set,
                        val: val_set,
                    },
                );
            }
        }
    }

    let mut jobs = Vec::with_capacity(spec.run_count());
    for &n_p in &spec.grid_sizes {
        for &theory in &spec.theories {
            for &order in &spec.orders {
                for &model in &spec.models {
                    for seed in 0..spec.train.seeds as u64 {
                        jobs.push(Job {
                            model,
                            theory,
                            order,
                            n_p,
                            seed,
                        });
                    }
                }
            }
        }
    }

    let outcomes: Vec<JobOutcome> = run_parallel(&jobs, spec.threads, |job| {
        let data = &datasets[&(job.theory, job.order, job.n_p)];
        run_job(spec, job, data).map_err(|e| e.to_string())
    });

    let mut report = ExperimentReport::new(spec.name.name());
    report.provenance = provenance;
    for (job, outcome) in jobs.iter().zip(outcomes) {
        match outcome {
            Ok((_, history, rows)) => {
                report.runs.push(RunRecord {
                    model: job.model,
                    theory: job.theory,
                    order: job.order,
                    n_p: job.n_p,
                    seed: job.seed,
                    history,
                });
                report.extrapolation.extend(rows);
            }
            Err(error) => report.failures.push(FailureRecord {
                model: job.model,
                theory: job.theory,
                order: job.order,
                n_p: job.n_p,
                seed: job.seed,
                error,
            }),
        }
    }
    report.runtime_seconds = started.elapsed().as_secs_f64();
    Ok(report)
}

fn run_job(spec: &ExperimentSpec, job: &Job, data: &DataPair) -> Result<(ModelParams, LossHistory, Vec<ExtrapolationRow>)> {
    let (params, history) = train(job.model, &data.train, &data.val, &spec.train, job.seed)?;
    let mut rows = Vec::new();
    if spec.name == ExperimentName::Extrapolation {
        let grid = data.train.provenance.grid;
        for &ratio in &spec.ratios {
            let scaled = data.train.regenerate_on(grid.scaled(ratio)?);
            rows.push(ExtrapolationRow {
                model: job.model,
                theory: job.theory,
                order: job.order,
                ratio,
                seed: job.seed,
                fractional_loss: fractional_loss(&params, &scaled, spec.train.steps)?,
            });
        }
    }
    Ok((params, history, rows))
}

pub fn run_convergence(spec: &ExperimentSpec) -> Result<ExperimentReport> {
    expect_name(spec, ExperimentName::Convergence)?;
    run_experiment(spec)
}

pub fn run_validation(spec: &ExperimentSpec) -> Result<ExperimentReport> {
    expect_name(spec, ExperimentName::Validation)?;
    run_experiment(spec)
}

pub fn run_higher_order(spec: &ExperimentSpec) -> Result<ExperimentReport> {
    expect_name(spec, ExperimentName::HigherOrder)?;
    run_experiment(spec)
}

pub fn run_extrapolation(spec: &ExperimentSpec) -> Result<ExperimentReport> {
    expect_name(spec, ExperimentName::Extrapolation)?;
    run_experiment(spec)
}

pub fn run_discretization(spec: &ExperimentSpec) -> Result<ExperimentReport> {
    expect_name(spec, ExperimentName::Discretization)?;
    run_experiment(spec)
}

fn expect_name(spec: &ExperimentSpec, name: ExperimentName) -> Result<()> {
    if spec.name != name {
        return Err(Error::Config(format!("expected a {name} spec, got {}", spec.name)));
    }
    Ok(())
}
