//! Experiment configuration: one TOML document describing geometry,
//! grids, phantom, solvers, noise, sweeps and output. Unknown keys are
//! rejected everywhere — a typo in a regularisation parameter must fail
//! loudly, not silently corrupt a sweep.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Result, TomoError};
use crate::geometry::SensorGeometry;
use crate::phantom::{GaussianBlob, NoiseModel, Phantom};
use crate::solvers::{RetroConfig, SartConfig};
use crate::spectroscopy::TransitionPair;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridConfig {
    /// Reconstruction pixel size.
    pub recon_pixel_size_cm: f64,
    /// Forward-projection (phantom) pixel size.
    pub forward_pixel_size_cm: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            recon_pixel_size_cm: 0.225,
            forward_pixel_size_cm: 0.09,
        }
    }
}

/// Phantom selection: either a named preset or an inline blob list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct PhantomConfig {
    pub preset: Option<String>,
    pub blobs: Vec<GaussianBlob>,
    pub ambient_temperature_k: Option<f64>,
    pub pressure_atm: Option<f64>,
}

impl PhantomConfig {
    pub fn resolve(&self) -> Result<Phantom> {
        let mut phantom = match (&self.preset, self.blobs.is_empty()) {
            (Some(name), true) => Phantom::preset(name)?,
            (None, false) => Phantom {
                blobs: self.blobs.clone(),
                ambient_temperature_k: 298.15,
                pressure_atm: 1.0,
            },
            (Some(_), false) => {
                return Err(TomoError::Config(
                    "phantom: give either a preset or an inline blob list, not both".into(),
                ))
            }
            (None, true) => {
                return Err(TomoError::Config(
                    "phantom: a preset name or at least one blob is required".into(),
                ))
            }
        };
        if let Some(t) = self.ambient_temperature_k {
            phantom.ambient_temperature_k = t;
        }
        if let Some(p) = self.pressure_atm {
            phantom.pressure_atm = p;
        }
        Ok(phantom)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseConfig {
    /// Operating signal-to-noise ratio; `inf` disables noise.
    pub snr_db: f64,
    pub base_seed: u64,
    /// Repeated-simulation count; seeds are `base_seed..base_seed+n`.
    pub num_seeds: usize,
    pub model: NoiseModel,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        NoiseConfig {
            snr_db: 40.0,
            base_seed: 1,
            num_seeds: 20,
            model: NoiseModel::PerMeasurement,
        }
    }
}

impl NoiseConfig {
    pub fn seeds(&self) -> Vec<u64> {
        (0..self.num_seeds as u64).map(|k| self.base_seed + k).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LambdaSweepConfig {
    pub max: f64,
    pub min: f64,
    pub steps: usize,
}

impl Default for LambdaSweepConfig {
    fn default() -> Self {
        // "lambda varies from 1 to 1e-9 with 40 steps of logarithmic
        // decrement"
        LambdaSweepConfig {
            max: 1.0,
            min: 1e-9,
            steps: 40,
        }
    }
}

impl LambdaSweepConfig {
    /// Descending logarithmic grid from `max` to `min`.
    pub fn grid(&self) -> Vec<f64> {
        log_grid(self.max, self.min, self.steps)
    }
}

/// `steps` log-spaced values from `first` to `last` inclusive.
pub fn log_grid(first: f64, last: f64, steps: usize) -> Vec<f64> {
    if steps == 1 {
        return vec![first];
    }
    let (a, b) = (first.ln(), last.ln());
    (0..steps)
        .map(|i| (a + (b - a) * i as f64 / (steps - 1) as f64).exp())
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepConfig {
    pub lambda: LambdaSweepConfig,
    /// RETRO gamma grid (defaults to 10 values, 1e-1 .. 1e-9).
    pub gamma: Vec<f64>,
    /// RETRO mu grid (defaults to 10 values, 1e-1 .. 1e-9).
    pub mu: Vec<f64>,
    pub snr_db: Vec<f64>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            lambda: LambdaSweepConfig::default(),
            gamma: log_grid(1e-1, 1e-9, 10),
            mu: log_grid(1e-1, 1e-9, 10),
            snr_db: vec![25.0, 30.0, 35.0, 40.0, 45.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub geometry: SensorGeometry,
    pub grid: GridConfig,
    /// Spectroscopic constants file; the built-in H2O pair when absent.
    pub spectroscopy_file: Option<PathBuf>,
    pub phantom: PhantomConfig,
    /// "sart", "retro" or "both".
    pub algorithm: String,
    pub sart: SartConfig,
    pub retro: RetroConfig,
    pub noise: NoiseConfig,
    pub sweep: SweepConfig,
    pub output_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            geometry: SensorGeometry::default(),
            grid: GridConfig::default(),
            spectroscopy_file: None,
            phantom: PhantomConfig {
                preset: Some("phantom1".into()),
                ..PhantomConfig::default()
            },
            algorithm: "both".into(),
            sart: SartConfig::default(),
            retro: RetroConfig::default(),
            noise: NoiseConfig::default(),
            sweep: SweepConfig::default(),
            output_dir: PathBuf::from("out"),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<ExperimentConfig> {
        let cfg: ExperimentConfig =
            toml::from_str(text).map_err(|e| TomoError::Config(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<ExperimentConfig> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| TomoError::Config(format!("config {}: {e}", path.display())))?;
        ExperimentConfig::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| TomoError::Config(format!("config: {e}")))
    }

    pub fn validate(&self) -> Result<()> {
        self.geometry.validate()?;
        if self.grid.recon_pixel_size_cm <= 0.0 || self.grid.forward_pixel_size_cm <= 0.0 {
            return Err(TomoError::Config("grid: pixel sizes must be positive".into()));
        }
        if !matches!(self.algorithm.as_str(), "sart" | "retro" | "both") {
            return Err(TomoError::Config(format!(
                "algorithm must be 'sart', 'retro' or 'both', got '{}'",
                self.algorithm
            )));
        }
        if self.noise.num_seeds == 0 {
            return Err(TomoError::Config("noise: at least one seed required".into()));
        }
        if self.sweep.lambda.steps == 0
            || self.sweep.gamma.is_empty()
            || self.sweep.mu.is_empty()
            || self.sweep.snr_db.is_empty()
        {
            return Err(TomoError::Config("sweep: grids must be non-empty".into()));
        }
        if let Some(path) = &self.spectroscopy_file {
            if !path.exists() {
                return Err(TomoError::Config(format!(
                    "spectroscopy file {} does not exist",
                    path.display()
                )));
            }
        }
        self.phantom.resolve()?;
        Ok(())
    }

    pub fn transition_pair(&self) -> Result<TransitionPair> {
        match &self.spectroscopy_file {
            Some(path) => TransitionPair::from_toml_file(path),
            None => Ok(TransitionPair::default_h2o()),
        }
    }
}
