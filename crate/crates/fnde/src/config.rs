//! Optional TOML run configuration. Every key is optional; command-line
//! flags override the file, which overrides the experiment defaults.
//!
//! ```toml
//! models = ["FNDE", "FNO"]
//! theories = ["phi4"]
//! orders = [1]
//! np = [10]
//! couplings = [0.1, 0.2, 0.3, 0.4]
//! masses = [0.5, 1.0, 1.5, 2.0]
//! ratio_max = 2.0
//! threads = 4
//!
//! [train]
//! epochs = 400
//! lr0 = 0.02
//! lr_drops = [100, 250]
//! seeds = 5
//! ```

use std::path::Path;

use fnde_core::{ModelKind, Theory};
use serde::Deserialize;

use crate::dataset::read_toml;
use crate::error::{Error, Result};
use crate::experiments::{ratio_sweep, ExperimentSpec};

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainSection {
    pub epochs: Option<usize>,
    pub lr0: Option<f64>,
    pub lr_drops: Option<Vec<usize>>,
    pub steps: Option<usize>,
    pub seeds: Option<usize>,
    pub modes: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub models: Option<Vec<String>>,
    pub theories: Option<Vec<String>>,
    pub orders: Option<Vec<usize>>,
    pub np: Option<Vec<usize>>,
    pub p_min: Option<f64>,
    pub p_max: Option<f64>,
    pub couplings: Option<Vec<f64>>,
    pub masses: Option<Vec<f64>>,
    pub val_offset: Option<f64>,
    pub ratio_max: Option<f64>,
    pub threads: Option<usize>,
    #[serde(default)]
    pub train: TrainSection,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        read_toml(path)
    }

    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    /// Overlays the set keys onto `spec`.
    pub fn apply(&self, spec: &mut ExperimentSpec) -> Result<()> {
        if let Some(models) = &self.models {
            spec.models = parse_all::<ModelKind>(models)?;
        }
        if let Some(theories) = &self.theories {
            spec.theories = parse_all::<Theory>(theories)?;
        }
        if let Some(orders) = &self.orders {
            spec.orders = orders.clone();
        }
        if let Some(np) = &self.np {
            spec.grid_sizes = np.clone();
        }
        if let Some(p_min) = self.p_min {
            spec.p_min = p_min;
        }
        if let Some(p_max) = self.p_max {
            spec.p_max = p_max;
        }
        if let Some(couplings) = &self.couplings {
            spec.couplings = couplings.clone();
        }
        if let Some(masses) = &self.masses {
            spec.masses = masses.clone();
        }
        if let Some(offset) = self.val_offset {
            spec.val_offset = offset;
        }
        if let Some(ratio_max) = self.ratio_max {
            spec.ratios = ratio_sweep(ratio_max);
        }
        if let Some(threads) = self.threads {
            spec.threads = threads.max(1);
        }
        let t = &self.train;
        if let Some(epochs) = t.epochs {
            spec.train = spec.train.with_epochs(epochs);
        }
        if let Some(lr0) = t.lr0 {
            spec.train.lr0 = lr0;
        }
        if let Some(drops) = &t.lr_drops {
            spec.train.lr_drops = drops.clone();
        }
        if let Some(steps) = t.steps {
            spec.train.steps = steps;
        }
        if let Some(seeds) = t.seeds {
            spec.train.seeds = seeds;
        }
        if let Some(modes) = t.modes {
            spec.train.modes = modes;
        }
        Ok(())
    }
}

fn parse_all<T: std::str::FromStr>(names: &[String]) -> Result<Vec<T>>
where
    Error: From<T::Err>,
{
    names.iter().map(|n| Ok(n.parse::<T>()?)).collect()
}
