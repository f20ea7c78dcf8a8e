//! Run configuration (TOML).
//!
//! Every key is optional; missing keys take the defaults below and unknown
//! keys are rejected. Command-line flags override the file. Each command
//! writes the resolved document as `config.resolved.toml` next to its outputs.
//!
//! Seeds: the top-level `seed` drives every subsystem. It is copied into
//! `train.seed` and `design.seed` on resolution, and is the noise seed of
//! `generate` and the teacher and split seed of `make-dataset`. Within the
//! core each consumer draws from its own stream (see `spinodal_core::rng`).

use std::path::Path;

use serde::{Deserialize, Serialize};
use spinodal_core::dataset::DEFAULT_E_S;
use spinodal_core::design::DesignConfig;
use spinodal_core::field::{
    DEFAULT_BETA_STAR, DEFAULT_DOMAIN_SIZE, DEFAULT_LAMBDA_PHI, DEFAULT_LAMBDA_R, DEFAULT_RESOLUTION, DEFAULT_THICKNESS,
};
use spinodal_core::train::TrainConfig;

use crate::error::{read_string, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FieldConfig {
    pub resolution: usize,
    pub domain_size: f64,
    /// Wavenumber in cycles per domain length.
    pub beta_star: f64,
    pub lambda_r: f64,
    pub lambda_phi: f64,
    /// Shell thickness in length units.
    pub thickness: f64,
    pub azimuth_bins: usize,
    pub polar_bins: usize,
}

impl Default for FieldConfig {
    fn default() -> Self {
        Self {
            resolution: DEFAULT_RESOLUTION,
            domain_size: DEFAULT_DOMAIN_SIZE,
            beta_star: DEFAULT_BETA_STAR,
            lambda_r: DEFAULT_LAMBDA_R,
            lambda_phi: DEFAULT_LAMBDA_PHI,
            thickness: DEFAULT_THICKNESS,
            azimuth_bins: 36,
            polar_bins: 9,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DatasetConfig {
    pub n_per_class: usize,
    /// Relative standard deviation of multiplicative stress noise.
    pub noise: f64,
    pub test_fraction: f64,
    /// Constituent modulus used to write stress in pressure units.
    pub e_s: f64,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self { n_per_class: 64, noise: 0.0, test_fraction: 0.1, e_s: DEFAULT_E_S }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    pub threads: Option<usize>,
    /// Start `e1` from the trained `e2` weights.
    pub transfer: bool,
    pub field: FieldConfig,
    pub dataset: DatasetConfig,
    pub train: TrainConfig,
    pub design: DesignConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            threads: None,
            transfer: true,
            field: FieldConfig::default(),
            dataset: DatasetConfig::default(),
            train: TrainConfig::default(),
            design: DesignConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> std::result::Result<Self, String> {
        toml::from_str(text).map_err(|e| e.to_string())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&read_string(path)?).map_err(|e| Error::usage(format!("{}: {e}", path.display())))
    }

    /// Propagates the master seed.
    pub fn resolved(mut self) -> Self {
        self.train.seed = self.seed;
        self.design.seed = self.seed;
        self
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let f = &self.field;
        if f.azimuth_bins == 0 || f.polar_bins == 0 {
            return Err(Error::usage("pole-figure bin counts must be positive"));
        }
        if !(0.0..1.0).contains(&self.dataset.test_fraction) {
            return Err(Error::usage("dataset.test_fraction must lie in [0, 1)"));
        }
        if !(self.dataset.e_s > 0.0) || !(self.dataset.noise >= 0.0) {
            return Err(Error::usage("dataset.e_s must be positive and dataset.noise nonnegative"));
        }
        if self.train.epochs == 0 || self.train.batch_size == 0 || !(self.train.learning_rate > 0.0) {
            return Err(Error::usage("train.epochs, train.batch_size and train.learning_rate must be positive"));
        }
        if !(self.design.kappa > 0.0) || self.design.starts == 0 {
            return Err(Error::usage("design.kappa and design.starts must be positive"));
        }
        Ok(())
    }
}
