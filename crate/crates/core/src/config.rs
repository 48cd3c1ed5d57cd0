//! Experiment configuration file (TOML).
//!
//! ```toml
//! seed = 7
//! variations = [0.60, 0.40, 0.24, 0.09]
//!
//! [device]
//! preset = "calibrated"   # or "raw"; other keys override the preset
//! sigma_c2c = 0.02
//!
//! [network]
//! c_factor = 2.0
//! ```
//!
//! Unknown keys anywhere are rejected. The output directory is not part of
//! the file; it comes from the command line.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::device::{DeviceParams, VariationSpec};
use crate::error::{Error, Result};
use crate::harness::{CalibrationGrid, CharacterizeOptions, FigureSettings};
use crate::hopfield::NetworkConfig;
use crate::metrics::NoiseReplay;
use crate::rng::Streams;
use crate::scenario::Scenario;

/// Root seed of the shipped configuration. With the calibrated device this
/// array recalls pattern 1 in 11 / 9 / 5 / 1 epochs at 60 / 40 / 24 / 9 %.
pub const DEFAULT_SEED: u64 = 801;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepOptions {
    /// Number of array seeds per cv, derived from the root seed.
    pub seeds: usize,
    pub grid_step: f64,
    pub grid_max: f64,
    pub replay: NoiseReplay,
}

impl Default for SweepOptions {
    fn default() -> Self {
        SweepOptions {
            seeds: 50,
            grid_step: 0.01,
            grid_max: 0.50,
            replay: NoiseReplay::Reseed,
        }
    }
}

impl SweepOptions {
    pub fn grid(&self) -> Vec<f64> {
        let n = (self.grid_max / self.grid_step + 1e-9).floor() as usize;
        (1..=n).map(|k| (k as f64 * self.grid_step * 1e9).round() / 1e9).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CalibrateOptions {
    /// Root of the calibration seed set, independent of the array seed.
    pub seed: u64,
    pub seeds: usize,
    /// `[cv, epochs]` pairs.
    pub targets: Vec<(f64, f64)>,
    pub grid: CalibrationGrid,
}

impl Default for CalibrateOptions {
    fn default() -> Self {
        CalibrateOptions {
            seed: 0,
            seeds: 400,
            targets: crate::harness::measured_epoch_targets(),
            grid: CalibrationGrid::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub variations: Vec<f64>,
    pub device: DeviceParams,
    pub network: NetworkConfig,
    pub characterize: CharacterizeOptions,
    pub sweep: SweepOptions,
    pub calibrate: CalibrateOptions,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: DEFAULT_SEED,
            variations: vec![0.60, 0.40, 0.24, 0.09],
            device: DeviceParams::calibrated(),
            network: NetworkConfig::default(),
            characterize: CharacterizeOptions::default(),
            sweep: SweepOptions::default(),
            calibrate: CalibrateOptions::default(),
        }
    }
}

fn config_err(e: impl std::fmt::Display) -> Error {
    Error::Config(e.to_string())
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let mut table: toml::Table = text.parse().map_err(config_err)?;
        let mut cfg = RunConfig::default();

        if let Some(device) = table.remove("device") {
            let mut device = match device {
                toml::Value::Table(t) => t,
                _ => return Err(Error::Config("[device] must be a table".into())),
            };
            let preset = match device.remove("preset") {
                None => DeviceParams::calibrated(),
                Some(toml::Value::String(s)) if s == "calibrated" => DeviceParams::calibrated(),
                Some(toml::Value::String(s)) if s == "raw" => DeviceParams::default(),
                Some(other) => return Err(Error::Config(format!("unknown device preset {other}"))),
            };
            let mut merged = toml::Table::try_from(&preset).map_err(config_err)?;
            for (k, v) in device {
                if let (Some(toml::Value::Table(base)), toml::Value::Table(over)) = (merged.get_mut(&k), &v) {
                    for (pk, pv) in over {
                        base.insert(pk.clone(), pv.clone());
                    }
                    continue;
                }
                merged.insert(k, v);
            }
            cfg.device = merged.try_into().map_err(config_err)?;
        }

        // Remaining top-level keys overlay the defaults section by section.
        let mut base = toml::Table::try_from(&cfg).map_err(config_err)?;
        for (k, v) in table {
            match (base.get_mut(&k), v) {
                (Some(toml::Value::Table(b)), toml::Value::Table(over)) => {
                    for (pk, pv) in over {
                        b.insert(pk, pv);
                    }
                }
                (Some(slot), v) => *slot = v,
                (None, _) => return Err(Error::Config(format!("unknown key `{k}`"))),
            }
        }
        let cfg: RunConfig = base.try_into().map_err(config_err)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let cfg_err = |e: Error| Error::Config(e.to_string());
        self.device.validate().map_err(cfg_err)?;
        self.network.validate(10).map_err(cfg_err)?;
        if self.variations.is_empty() {
            return Err(Error::Config("variation list is empty".into()));
        }
        for &cv in &self.variations {
            VariationSpec::new(cv).map_err(cfg_err)?;
        }
        let mut tags: Vec<String> = self.variations.iter().map(|cv| format!("{cv:.2}")).collect();
        tags.sort();
        if tags.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Config("variation list has duplicate cvs".into()));
        }
        self.characterize.validate().map_err(cfg_err)?;
        if self.sweep.seeds < 1 || self.calibrate.seeds < 1 {
            return Err(Error::Config("seed counts must be >= 1".into()));
        }
        if !(self.sweep.grid_step > 0.0 && self.sweep.grid_max < 1.0 && self.sweep.grid_step <= self.sweep.grid_max) {
            return Err(Error::Config("sensitivity grid must satisfy 0 < grid_step <= grid_max < 1".into()));
        }
        if self.calibrate.targets.is_empty() {
            return Err(Error::Config("calibration targets are empty".into()));
        }
        Ok(())
    }

    /// First 16 hex digits of the SHA-256 of the canonical serialization.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.to_toml_string().as_bytes());
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }

    pub fn variation_specs(&self) -> Vec<VariationSpec> {
        self.variations
            .iter()
            .map(|&cv| VariationSpec::new(cv).expect("validated"))
            .collect()
    }

    /// One scenario per configured cv, all on the root seed.
    pub fn scenarios(&self) -> Vec<Scenario> {
        self.variation_specs()
            .into_iter()
            .map(|v| {
                Scenario::new(
                    format!("cv{:.2}", v.cv),
                    self.device.clone(),
                    v,
                    self.network.clone(),
                    self.seed,
                )
            })
            .collect()
    }

    pub fn sweep_seeds(&self) -> Vec<u64> {
        derived_seeds(self.seed, "sweep", self.sweep.seeds)
    }

    pub fn calibrate_seeds(&self) -> Vec<u64> {
        derived_seeds(self.calibrate.seed, "calibrate", self.calibrate.seeds)
    }

    pub fn figure_settings(&self) -> FigureSettings {
        FigureSettings {
            characterize: self.characterize.clone(),
            sweep_seeds: self.sweep_seeds(),
            sensitivity_grid: self.sweep.grid(),
            replay: self.sweep.replay,
        }
    }
}

fn derived_seeds(root: u64, label: &str, n: usize) -> Vec<u64> {
    let s = Streams::new(root);
    (0..n as u64).map(|k| s.seed_for(label, k)).collect()
}
