//! Dataset CSV (one line per matrix entry) with a TOML provenance sidecar.

use std::fs;
use std::path::{Path, PathBuf};

use fnde_core::theory::{Provenance, CUTOFF_RATIO};
use fnde_core::{Complex64, ComplexMatrix, Dataset, MomentumGrid, Sample, Theory, TheoryConfig};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const DATASET_HEADER: [&str; 11] = [
    "theory", "order", "lambda", "mass", "n_p", "p_min", "p_max", "row", "col", "re", "im",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct EntryRow {
    theory: String,
    order: usize,
    lambda: f64,
    mass: f64,
    n_p: usize,
    p_min: f64,
    p_max: f64,
    row: usize,
    col: usize,
    re: f64,
    im: f64,
}

/// Generation settings written next to a dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProvenanceRecord {
    pub theory: String,
    pub order: usize,
    pub n_p: usize,
    pub p_min: f64,
    pub p_max: f64,
    /// Grid offset in spacings (0.5 for validation grids).
    pub offset: f64,
    pub cutoff: f64,
    pub couplings: Vec<f64>,
    pub masses: Vec<f64>,
    pub samples: usize,
    /// SHA-256 of the dataset CSV bytes.
    pub sha256: String,
}

pub fn sidecar_path(csv_path: &Path) -> PathBuf {
    csv_path.with_extension("toml")
}

/// The dataset CSV exactly as [`write_dataset`] stores it.
pub fn dataset_csv_bytes(dataset: &Dataset) -> Vec<u8> {
    let mut writer = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    writer.write_record(DATASET_HEADER).expect("in-memory write");
    for sample in &dataset.samples {
        let n = sample.grid.n_p;
        for row in 0..n {
            for col in 0..n {
                let v = sample.target[(row, col)];
                writer
                    .serialize(EntryRow {
                        theory: sample.config.theory.name().to_string(),
                        order: sample.config.order,
                        lambda: sample.config.coupling,
                        mass: sample.config.mass,
                        n_p: n,
                        p_min: sample.grid.p_min,
                        p_max: sample.grid.p_max,
                        row,
                        col,
                        re: v.re,
                        im: v.im,
                    })
                    .expect("in-memory write");
            }
        }
    }
    writer.into_inner().expect("in-memory flush")
}

/// Hex SHA-256 of the dataset's CSV serialization.
pub fn provenance_hash(dataset: &Dataset) -> String {
    hex::encode(Sha256::digest(dataset_csv_bytes(dataset)))
}

pub fn provenance_record(dataset: &Dataset) -> ProvenanceRecord {
    let p = &dataset.provenance;
    ProvenanceRecord {
        theory: p.theory.name().to_string(),
        order: p.order,
        n_p: p.grid.n_p,
        p_min: p.grid.p_min,
        p_max: p.grid.p_max,
        offset: p.grid.offset,
        cutoff: p.cutoff,
        couplings: p.couplings.clone(),
        masses: p.masses.clone(),
        samples: dataset.len(),
        sha256: provenance_hash(dataset),
    }
}

pub(crate) fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub(crate) fn write_toml<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = toml::to_string(value).map_err(|e| Error::format(path, e.to_string()))?;
    write_bytes(path, text.as_bytes())
}

pub(crate) fn read_toml<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    toml::from_str(&text).map_err(|e| Error::format(path, e.to_string()))
}

/// Writes the CSV and its sidecar; returns the provenance record.
pub fn write_dataset(dataset: &Dataset, csv_path: &Path) -> Result<ProvenanceRecord> {
    write_bytes(csv_path, &dataset_csv_bytes(dataset))?;
    let record = provenance_record(dataset);
    write_toml(&sidecar_path(csv_path), &record)?;
    Ok(record)
}

/// Reads a dataset CSV. Grid offset and loop cutoff come from the sidecar
/// when present; otherwise the grid is unshifted and `Λ = 10·p_max`.
pub fn read_dataset(csv_path: &Path) -> Result<Dataset> {
    let sidecar = sidecar_path(csv_path);
    let record: Option<ProvenanceRecord> = if sidecar.exists() {
        Some(read_toml(&sidecar)?)
    } else {
        None
    };
    let mut reader = csv::Reader::from_path(csv_path).map_err(|e| Error::csv(csv_path, e))?;
    let header = reader.headers().map_err(|e| Error::csv(csv_path, e))?.clone();
    if header.iter().ne(DATASET_HEADER) {
        return Err(Error::format(csv_path, format!("unexpected header {header:?}")));
    }
    let rows: Vec<EntryRow> = reader
        .deserialize()
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| Error::csv(csv_path, e))?;
    let first = rows
        .first()
        .ok_or_else(|| Error::format(csv_path, "dataset has no entries"))?;
    let theory: Theory = first.theory.parse()?;
    let mut grid = MomentumGrid::new(first.n_p, first.p_min, first.p_max)?;
    grid.offset = record.as_ref().map_or(0.0, |r| r.offset);
    let cutoff = record
        .as_ref()
        .map_or(CUTOFF_RATIO * grid.p_max, |r| r.cutoff);
    let nn = grid.n_p * grid.n_p;
    if rows.len() % nn != 0 {
        return Err(Error::format(
            csv_path,
            format!("{} entries is not a whole number of {}x{} matrices", rows.len(), grid.n_p, grid.n_p),
        ));
    }

    let mut samples = Vec::with_capacity(rows.len() / nn);
    for chunk in rows.chunks(nn) {
        let head = &chunk[0];
        let mut target = ComplexMatrix::zeros(grid.n_p, grid.n_p);
        for (k, entry) in chunk.iter().enumerate() {
            let consistent = entry.theory == head.theory
                && entry.order == head.order
                && entry.lambda == head.lambda
                && entry.mass == head.mass
                && entry.n_p == grid.n_p
                && entry.p_min == grid.p_min
                && entry.p_max == grid.p_max
                && (entry.row, entry.col) == (k / grid.n_p, k % grid.n_p);
            if !consistent {
                return Err(Error::format(
                    csv_path,
                    format!("entry {} of sample {} is out of order or inconsistent", k, samples.len()),
                ));
            }
            target[(entry.row, entry.col)] = Complex64::new(entry.re, entry.im);
        }
        let config = TheoryConfig::with_cutoff(head.theory.parse()?, head.lambda, head.mass, head.order, cutoff)?;
        samples.push(Sample { config, grid, target });
    }

    let unique = |values: Vec<f64>| {
        let mut out: Vec<f64> = Vec::new();
        for v in values {
            if !out.contains(&v) {
                out.push(v);
            }
        }
        out
    };
    let provenance = match record {
        Some(r) => Provenance {
            theory,
            order: r.order,
            grid,
            couplings: r.couplings,
            masses: r.masses,
            cutoff,
        },
        None => Provenance {
            theory,
            order: first.order,
            grid,
            couplings: unique(samples.iter().map(|s| s.config.coupling).collect()),
            masses: unique(samples.iter().map(|s| s.config.mass).collect()),
            cutoff,
        },
    };
    Ok(Dataset { samples, provenance })
}

pub const MATRIX_HEADER: [&str; 4] = ["row", "col", "re", "im"];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
struct MatrixEntry {
    row: usize,
    col: usize,
    re: f64,
    im: f64,
}

/// One line per entry, row-major.
pub fn write_matrix_csv(matrix: &ComplexMatrix, path: &Path) -> Result<()> {
    let mut writer = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    writer.write_record(MATRIX_HEADER).expect("in-memory write");
    for row in 0..matrix.rows() {
        for col in 0..matrix.cols() {
            let v = matrix[(row, col)];
            writer
                .serialize(MatrixEntry { row, col, re: v.re, im: v.im })
                .expect("in-memory write");
        }
    }
    write_bytes(path, &writer.into_inner().expect("in-memory flush"))
}

pub fn read_matrix_csv(path: &Path) -> Result<ComplexMatrix> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| Error::csv(path, e))?;
    let entries: Vec<MatrixEntry> = reader
        .deserialize()
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| Error::csv(path, e))?;
    let rows = entries.iter().map(|e| e.row + 1).max().unwrap_or(0);
    let cols = entries.iter().map(|e| e.col + 1).max().unwrap_or(0);
    if entries.len() != rows * cols {
        return Err(Error::format(path, "matrix entries do not fill a rectangle"));
    }
    let mut matrix = ComplexMatrix::zeros(rows, cols);
    for e in entries {
        matrix[(e.row, e.col)] = Complex64::new(e.re, e.im);
    }
    Ok(matrix)
}
