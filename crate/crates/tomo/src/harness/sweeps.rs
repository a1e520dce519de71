//! Parameter sweeps: the SART lambda study, the RETRO gamma-mu surface
//! and the SNR robustness comparison.

use crate::error::{Result, TomoError};
use crate::harness::config::ExperimentConfig;
use crate::harness::runner::{Experiment, MetricsSummary};
use crate::solvers::Algorithm;

#[derive(Debug, Clone)]
pub struct LambdaPoint {
    pub lambda: f64,
    pub mean_ie: f64,
    pub std_ie: f64,
}

#[derive(Debug, Clone)]
pub struct LambdaSweep {
    pub points: Vec<LambdaPoint>,
    pub argmin_lambda: f64,
    pub min_mean_ie: f64,
}

/// Mean IE per lambda at the experiment's noise settings.
pub fn run_lambda_sweep(exp: &Experiment, grid: &[f64]) -> Result<LambdaSweep> {
    if grid.is_empty() {
        return Err(TomoError::Config("lambda grid is empty".into()));
    }
    let seeds = exp.config.noise.seeds();
    let snr = exp.config.noise.snr_db;
    let mut points = Vec::with_capacity(grid.len());
    for &lambda in grid {
        let mut cfg = exp.config.sart;
        cfg.lambda = lambda;
        let agg = exp.mean_metrics(&Algorithm::Sart(cfg), snr, &seeds)?;
        points.push(LambdaPoint {
            lambda,
            mean_ie: agg.mean.ie,
            std_ie: agg.std.ie,
        });
    }
    let best = points
        .iter()
        .min_by(|a, b| a.mean_ie.partial_cmp(&b.mean_ie).unwrap())
        .unwrap();
    Ok(LambdaSweep {
        argmin_lambda: best.lambda,
        min_mean_ie: best.mean_ie,
        points: points.clone(),
    })
}

#[derive(Debug, Clone)]
pub struct GammaMuPoint {
    pub gamma: f64,
    pub mu: f64,
    pub mean_ie: f64,
}

#[derive(Debug, Clone)]
pub struct GammaMuSweep {
    /// Row-major over (gamma, mu).
    pub points: Vec<GammaMuPoint>,
    pub argmin: (f64, f64),
    pub min_mean_ie: f64,
}

/// Mean IE per (gamma, mu) combination.
pub fn run_gamma_mu_sweep(
    exp: &Experiment,
    gammas: &[f64],
    mus: &[f64],
) -> Result<GammaMuSweep> {
    if gammas.is_empty() || mus.is_empty() {
        return Err(TomoError::Config("gamma/mu grids are empty".into()));
    }
    let seeds = exp.config.noise.seeds();
    let snr = exp.config.noise.snr_db;
    let mut points = Vec::with_capacity(gammas.len() * mus.len());
    for &gamma in gammas {
        for &mu in mus {
            let mut cfg = exp.config.retro;
            cfg.gamma = gamma;
            cfg.mu = mu;
            let agg = exp.mean_metrics(&Algorithm::Retro(cfg), snr, &seeds)?;
            points.push(GammaMuPoint {
                gamma,
                mu,
                mean_ie: agg.mean.ie,
            });
        }
    }
    let best = points
        .iter()
        .min_by(|a, b| a.mean_ie.partial_cmp(&b.mean_ie).unwrap())
        .unwrap();
    Ok(GammaMuSweep {
        argmin: (best.gamma, best.mu),
        min_mean_ie: best.mean_ie,
        points: points.clone(),
    })
}

#[derive(Debug, Clone)]
pub struct SnrPoint {
    pub snr_db: f64,
    pub algorithm: &'static str,
    /// Averaged over phantoms and seeds.
    pub metrics: MetricsSummary,
}

/// Metric-versus-SNR comparison of both algorithms, averaged over the
/// three preset phantoms.
pub fn run_snr_sweep(config: &ExperimentConfig, snr_grid: &[f64]) -> Result<Vec<SnrPoint>> {
    if snr_grid.is_empty() {
        return Err(TomoError::Config("SNR grid is empty".into()));
    }
    let presets = ["phantom1", "phantom2", "phantom3"];
    let mut experiments = Vec::new();
    for preset in presets {
        let mut cfg = config.clone();
        cfg.phantom.preset = Some(preset.into());
        cfg.phantom.blobs.clear();
        experiments.push(Experiment::prepare(cfg)?);
    }
    let seeds = config.noise.seeds();
    let mut out = Vec::new();
    for &snr in snr_grid {
        for name in ["sart", "retro"] {
            let mut acc = MetricsSummary::default();
            for exp in &experiments {
                let algo = exp.algorithm(name)?;
                let agg = exp.mean_metrics(&algo, snr, &seeds)?;
                acc.ie += agg.mean.ie / presets.len() as f64;
                acc.dl += agg.mean.dl / presets.len() as f64;
                acc.cve += agg.mean.cve / presets.len() as f64;
                acc.os += agg.mean.os / presets.len() as f64;
            }
            out.push(SnrPoint {
                snr_db: snr,
                algorithm: if name == "sart" { "sart" } else { "retro" },
                metrics: acc,
            });
        }
    }
    Ok(out)
}
