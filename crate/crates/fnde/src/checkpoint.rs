//! Versioned text checkpoint of model parameters.
//!
//! ```text
//! fnde-checkpoint 1
//! kind FNDE
//! n_p 10
//! channels 4
//! modes 10
//! hidden 100
//! momentum_scale 2
//! tensor w complex 4 4
//! <2·16 reals, interleaved re im, 8 per line>
//! tensor kappa complex 4 4 10 10
//! ...
//! ```
//!
//! Tensors appear in layout order; real values are written in shortest
//! round-trip form, so save followed by load is bit-exact.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use fnde_core::models::ModelShape;
use fnde_core::{ModelKind, ModelParams};

use crate::dataset::write_bytes;
use crate::error::{Error, Result};

pub const CHECKPOINT_MAGIC: &str = "fnde-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;
const VALUES_PER_LINE: usize = 8;

pub fn checkpoint_to_string(params: &ModelParams) -> String {
    let mut out = String::new();
    let s = &params.shape;
    let _ = writeln!(out, "{CHECKPOINT_MAGIC} {CHECKPOINT_VERSION}");
    let _ = writeln!(out, "kind {}", params.kind);
    let _ = writeln!(out, "n_p {}", s.n_p);
    let _ = writeln!(out, "channels {}", s.channels);
    let _ = writeln!(out, "modes {}", s.modes);
    let _ = writeln!(out, "hidden {}", s.hidden);
    let _ = writeln!(out, "momentum_scale {:?}", params.momentum_scale);
    for spec in params.layout() {
        let dims: Vec<String> = spec.dims.iter().map(|d| d.to_string()).collect();
        let field = if spec.complex { "complex" } else { "real" };
        let _ = writeln!(out, "tensor {} {} {}", spec.name, field, dims.join(" "));
        for line in params.values[spec.range()].chunks(VALUES_PER_LINE) {
            let text: Vec<String> = line.iter().map(|v| format!("{v:?}")).collect();
            let _ = writeln!(out, "{}", text.join(" "));
        }
    }
    out
}

pub fn save_checkpoint(params: &ModelParams, path: &Path) -> Result<()> {
    write_bytes(path, checkpoint_to_string(params).as_bytes())
}

pub fn load_checkpoint(path: &Path) -> Result<ModelParams> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_checkpoint(&text).map_err(|message| Error::format(path, message))
}

pub fn parse_checkpoint(text: &str) -> std::result::Result<ModelParams, String> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let mut next = |what: &str| lines.next().ok_or_else(|| format!("missing {what}"));

    let magic = next("header")?;
    let mut parts = magic.split_whitespace();
    if parts.next() != Some(CHECKPOINT_MAGIC) {
        return Err("not an fnde checkpoint".into());
    }
    let version: u32 = parts
        .next()
        .and_then(|v| v.parse().ok())
        .ok_or("missing format version")?;
    if version != CHECKPOINT_VERSION {
        return Err(format!("unsupported checkpoint version {version}"));
    }

    let mut field = |key: &str| -> std::result::Result<String, String> {
        let line = next(key)?;
        let (k, v) = line.split_once(' ').ok_or_else(|| format!("malformed line `{line}`"))?;
        if k != key {
            return Err(format!("expected `{key}`, found `{k}`"));
        }
        Ok(v.trim().to_string())
    };
    let num = |v: String, key: &str| v.parse::<usize>().map_err(|_| format!("bad {key} `{v}`"));

    let kind: ModelKind = field("kind")?.parse().map_err(|e| format!("{e}"))?;
    let n_p = num(field("n_p")?, "n_p")?;
    let channels = num(field("channels")?, "channels")?;
    let modes = num(field("modes")?, "modes")?;
    let hidden = num(field("hidden")?, "hidden")?;
    let momentum_scale: f64 = field("momentum_scale")?
        .parse()
        .map_err(|_| "bad momentum_scale".to_string())?;

    let shape = ModelShape::new(n_p, modes).map_err(|e| e.to_string())?;
    if shape.channels != channels || shape.hidden != hidden || shape.modes != modes {
        return Err(format!(
            "unsupported shape (channels {channels}, modes {modes}, hidden {hidden})"
        ));
    }
    let mut params = ModelParams::zeros(kind, shape);
    params.momentum_scale = momentum_scale;

    let mut rest = text
        .lines()
        .filter(|l| !l.trim().is_empty())
        .skip(7)
        .flat_map(|l| l.split_whitespace());
    for spec in params.layout() {
        let header: Vec<&str> = (&mut rest).take(3 + spec.dims.len()).collect();
        let expected_field = if spec.complex { "complex" } else { "real" };
        let dims: Vec<usize> = header.iter().skip(3).filter_map(|d| d.parse().ok()).collect();
        if header.len() < 3
            || header[0] != "tensor"
            || header[1] != spec.name
            || header[2] != expected_field
            || dims != spec.dims
        {
            return Err(format!(
                "expected tensor `{}` {expected_field} {:?}, found `{}`",
                spec.name,
                spec.dims,
                header.join(" ")
            ));
        }
        for slot in &mut params.values[spec.range()] {
            let token = rest
                .next()
                .ok_or_else(|| format!("tensor `{}` is truncated", spec.name))?;
            *slot = token
                .parse()
                .map_err(|_| format!("bad value `{token}` in tensor `{}`", spec.name))?;
        }
    }
    if let Some(extra) = rest.next() {
        return Err(format!("trailing data starting at `{extra}`"));
    }
    Ok(params)
}
