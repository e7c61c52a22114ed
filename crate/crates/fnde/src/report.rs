//! Experiment reports and their CSV serializations.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use fnde_core::training::{LossHistory, RunSummary};
use fnde_core::{ModelKind, Theory};
use serde::{Deserialize, Serialize};

use crate::dataset::{write_bytes, write_toml};
use crate::error::{Error, Result};

pub const HISTORY_HEADER: [&str; 7] = ["epoch", "seed", "model", "theory", "order", "train_loss", "val_loss"];
pub const EXTRAPOLATION_HEADER: [&str; 6] = ["model", "theory", "order", "ratio", "seed", "fractional_loss"];
pub const SUMMARY_HEADER: [&str; 11] = [
    "model", "theory", "order", "n_p", "epoch", "train_mean", "train_min", "train_max", "val_mean", "val_min",
    "val_max",
];
pub const FAILURE_HEADER: [&str; 6] = ["model", "theory", "order", "n_p", "seed", "error"];

/// One training run's loss history.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub model: ModelKind,
    pub theory: Theory,
    pub order: usize,
    pub n_p: usize,
    pub seed: u64,
    pub history: LossHistory,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtrapolationRow {
    #[serde(with = "model_name")]
    pub model: ModelKind,
    #[serde(with = "theory_name")]
    pub theory: Theory,
    pub order: usize,
    pub ratio: f64,
    pub seed: u64,
    pub fractional_loss: f64,
}

/// A run that did not complete; recorded instead of aborting the sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailureRecord {
    #[serde(with = "model_name")]
    pub model: ModelKind,
    #[serde(with = "theory_name")]
    pub theory: Theory,
    pub order: usize,
    pub n_p: usize,
    pub seed: u64,
    pub error: String,
}

/// Seed-mean and envelope for one (model, theory, order, n_p) group.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesSummary {
    pub model: ModelKind,
    pub theory: Theory,
    pub order: usize,
    pub n_p: usize,
    pub summary: RunSummary,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ExperimentReport {
    pub name: String,
    pub runs: Vec<RunRecord>,
    pub extrapolation: Vec<ExtrapolationRow>,
    pub failures: Vec<FailureRecord>,
    /// Dataset label → SHA-256 of its CSV serialization.
    pub provenance: BTreeMap<String, String>,
    pub runtime_seconds: f64,
}

type GroupKey = (ModelKind, Theory, usize, usize);

impl ExperimentReport {
    pub fn new(name: impl Into<String>) -> Self {
        ExperimentReport {
            name: name.into(),
            ..Default::default()
        }
    }

    /// Groups in first-appearance order.
    pub fn summaries(&self) -> Vec<SeriesSummary> {
        let mut order: Vec<GroupKey> = Vec::new();
        let mut groups: BTreeMap<GroupKey, Vec<LossHistory>> = BTreeMap::new();
        for run in &self.runs {
            let key = (run.model, run.theory, run.order, run.n_p);
            if !groups.contains_key(&key) {
                order.push(key);
            }
            groups.entry(key).or_default().push(run.history.clone());
        }
        order
            .into_iter()
            .filter_map(|key| {
                let summary = RunSummary::from_runs(groups.remove(&key)?).ok()?;
                Some(SeriesSummary {
                    model: key.0,
                    theory: key.1,
                    order: key.2,
                    n_p: key.3,
                    summary,
                })
            })
            .collect()
    }

    pub fn is_finite(&self) -> bool {
        self.runs
            .iter()
            .all(|r| r.history.train.iter().chain(&r.history.val).all(|v| v.is_finite()))
            && self.extrapolation.iter().all(|r| r.fractional_loss.is_finite())
    }

    /// Distinct grid sizes in first-appearance order.
    pub fn grid_sizes(&self) -> Vec<usize> {
        let mut sizes = Vec::new();
        for run in &self.runs {
            if !sizes.contains(&run.n_p) {
                sizes.push(run.n_p);
            }
        }
        sizes
    }
}

mod model_name {
    use fnde_core::ModelKind;
    use serde::{de::Error, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(kind: &ModelKind, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(kind.name())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<ModelKind, D::Error> {
        String::deserialize(d)?.parse().map_err(D::Error::custom)
    }
}

mod theory_name {
    use fnde_core::Theory;
    use serde::{de::Error, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(theory: &Theory, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(theory.name())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Theory, D::Error> {
        String::deserialize(d)?.parse().map_err(D::Error::custom)
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct HistoryRow {
    epoch: usize,
    seed: u64,
    #[serde(with = "model_name")]
    model: ModelKind,
    #[serde(with = "theory_name")]
    theory: Theory,
    order: usize,
    train_loss: f64,
    val_loss: f64,
}

#[derive(Debug, Serialize)]
struct SummaryRow {
    #[serde(with = "model_name")]
    model: ModelKind,
    #[serde(with = "theory_name")]
    theory: Theory,
    order: usize,
    n_p: usize,
    epoch: usize,
    train_mean: f64,
    train_min: f64,
    train_max: f64,
    val_mean: f64,
    val_min: f64,
    val_max: f64,
}

fn csv_bytes<T: Serialize>(header: &[&str], rows: impl IntoIterator<Item = T>) -> Vec<u8> {
    let mut writer = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(Vec::new());
    writer.write_record(header).expect("in-memory write");
    for row in rows {
        writer.serialize(row).expect("in-memory write");
    }
    writer.into_inner().expect("in-memory flush")
}

pub fn history_csv_bytes(runs: &[RunRecord]) -> Vec<u8> {
    csv_bytes(
        &HISTORY_HEADER,
        runs.iter().flat_map(|run| {
            (0..run.history.len()).map(move |epoch| HistoryRow {
                epoch,
                seed: run.seed,
                model: run.model,
                theory: run.theory,
                order: run.order,
                train_loss: run.history.train[epoch],
                val_loss: run.history.val[epoch],
            })
        }),
    )
}

pub fn write_history_csv(runs: &[RunRecord], path: &Path) -> Result<()> {
    write_bytes(path, &history_csv_bytes(runs))
}

fn read_rows<T: for<'de> Deserialize<'de>>(path: &Path, header: &[&str]) -> Result<Vec<T>> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| Error::csv(path, e))?;
    let found = reader.headers().map_err(|e| Error::csv(path, e))?.clone();
    if found.iter().ne(header.iter().copied()) {
        return Err(Error::format(path, format!("unexpected header {found:?}")));
    }
    reader
        .deserialize()
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| Error::csv(path, e))
}

/// Rebuilds run records from a history CSV. The schema carries no grid size,
/// so the caller supplies it.
pub fn read_history_csv(path: &Path, n_p: usize) -> Result<Vec<RunRecord>> {
    let rows: Vec<HistoryRow> = read_rows(path, &HISTORY_HEADER)?;
    let mut runs: Vec<RunRecord> = Vec::new();
    for row in rows {
        let continues = runs.last().is_some_and(|r: &RunRecord| {
            (r.model, r.theory, r.order, r.seed) == (row.model, row.theory, row.order, row.seed)
                && r.history.len() == row.epoch
        });
        if !continues {
            if row.epoch != 0 {
                return Err(Error::format(path, format!("run history starts at epoch {}", row.epoch)));
            }
            runs.push(RunRecord {
                model: row.model,
                theory: row.theory,
                order: row.order,
                n_p,
                seed: row.seed,
                history: LossHistory::default(),
            });
        }
        let run = runs.last_mut().expect("pushed above");
        run.history.train.push(row.train_loss);
        run.history.val.push(row.val_loss);
    }
    Ok(runs)
}

pub fn write_extrapolation_csv(rows: &[ExtrapolationRow], path: &Path) -> Result<()> {
    write_bytes(path, &csv_bytes(&EXTRAPOLATION_HEADER, rows))
}

pub fn read_extrapolation_csv(path: &Path) -> Result<Vec<ExtrapolationRow>> {
    read_rows(path, &EXTRAPOLATION_HEADER)
}

pub fn write_failures_csv(rows: &[FailureRecord], path: &Path) -> Result<()> {
    write_bytes(path, &csv_bytes(&FAILURE_HEADER, rows))
}

pub fn read_failures_csv(path: &Path) -> Result<Vec<FailureRecord>> {
    read_rows(path, &FAILURE_HEADER)
}

pub fn write_summary_csv(summaries: &[SeriesSummary], path: &Path) -> Result<()> {
    let rows = summaries.iter().flat_map(|s| {
        let m = &s.summary;
        (0..m.mean.len()).map(move |epoch| SummaryRow {
            model: s.model,
            theory: s.theory,
            order: s.order,
            n_p: s.n_p,
            epoch,
            train_mean: m.mean.train[epoch],
            train_min: m.min.train[epoch],
            train_max: m.max.train[epoch],
            val_mean: m.mean.val[epoch],
            val_min: m.min.val[epoch],
            val_max: m.max.val[epoch],
        })
    });
    write_bytes(path, &csv_bytes(&SUMMARY_HEADER, rows))
}

#[derive(Debug, Serialize, Deserialize)]
struct ReportMetadata {
    name: String,
    runs: usize,
    failures: usize,
    runtime_seconds: f64,
    provenance: BTreeMap<String, String>,
}

/// Files written by [`emit_csv`].
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EmittedFiles {
    /// One history file per grid size.
    pub histories: Vec<(usize, PathBuf)>,
    pub summary: PathBuf,
    pub extrapolation: Option<PathBuf>,
    pub failures: PathBuf,
    pub metadata: PathBuf,
}

/// Writes `<name>_history.csv` (or `<name>_np<N>_history.csv` per grid size
/// when several are present), the seed summary, extrapolation rows, failures,
/// and a TOML sidecar with runtime and dataset hashes. Every CSV is a pure
/// function of the runs, so identical runs give identical bytes.
pub fn emit_csv(report: &ExperimentReport, dir: &Path) -> Result<EmittedFiles> {
    let name = &report.name;
    let sizes = report.grid_sizes();
    let mut histories = Vec::new();
    if sizes.len() <= 1 {
        let path = dir.join(format!("{name}_history.csv"));
        write_history_csv(&report.runs, &path)?;
        histories.push((sizes.first().copied().unwrap_or(0), path));
    } else {
        for n_p in sizes {
            let runs: Vec<RunRecord> = report.runs.iter().filter(|r| r.n_p == n_p).cloned().collect();
            let path = dir.join(format!("{name}_np{n_p}_history.csv"));
            write_history_csv(&runs, &path)?;
            histories.push((n_p, path));
        }
    }
    let summary = dir.join(format!("{name}_summary.csv"));
    write_summary_csv(&report.summaries(), &summary)?;
    let extrapolation = if report.extrapolation.is_empty() {
        None
    } else {
        let path = dir.join(format!("{name}_extrapolation.csv"));
        write_extrapolation_csv(&report.extrapolation, &path)?;
        Some(path)
    };
    let failures = dir.join(format!("{name}_failures.csv"));
    write_failures_csv(&report.failures, &failures)?;
    let metadata = dir.join(format!("{name}_report.toml"));
    write_toml(
        &metadata,
        &ReportMetadata {
            name: name.clone(),
            runs: report.runs.len(),
            failures: report.failures.len(),
            runtime_seconds: report.runtime_seconds,
            provenance: report.provenance.clone(),
        },
    )?;
    Ok(EmittedFiles {
        histories,
        summary,
        extrapolation,
        failures,
        metadata,
    })
}
