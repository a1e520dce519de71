//! Single-run orchestration: phantom → forward projection → noise per
//! seed → reconstruction → metrics → seed aggregation.

use rayon::prelude::*;

use crate::error::{Result, TomoError};
use crate::field::Field;
use crate::harness::config::ExperimentConfig;
use crate::metrics::{evaluate, MetricReport};
use crate::phantom::{add_noise, forward_project, MeasurementSet, Phantom};
use crate::solvers::{reconstruct_prepared, Algorithm, Operators, ReconstructionResult};
use crate::spectroscopy::TransitionPair;

/// The four image metrics as plain numbers.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MetricsSummary {
    pub ie: f64,
    pub dl: f64,
    pub cve: f64,
    pub os: f64,
}

impl From<&MetricReport> for MetricsSummary {
    fn from(r: &MetricReport) -> Self {
        MetricsSummary {
            ie: r.ie,
            dl: r.dl,
            cve: r.cve,
            os: r.os,
        }
    }
}

/// One seed's reconstruction and its evaluation.
#[derive(Debug, Clone)]
pub struct SeedRun {
    pub seed: u64,
    pub snr_db: f64,
    pub metrics: MetricReport,
    pub result: ReconstructionResult,
}

/// Seed-aggregated metrics. The means and standard deviations are plain
/// arithmetic over `per_seed` in seed order, so they are exactly
/// recomputable from the per-seed rows.
#[derive(Debug, Clone)]
pub struct AggregateMetrics {
    pub seeds: Vec<u64>,
    pub per_seed: Vec<MetricsSummary>,
    pub mean: MetricsSummary,
    pub std: MetricsSummary,
}

fn aggregate(seeds: &[u64], per_seed: Vec<MetricsSummary>) -> AggregateMetrics {
    let n = per_seed.len() as f64;
    let mut mean = MetricsSummary::default();
    for m in &per_seed {
        mean.ie += m.ie / n;
        mean.dl += m.dl / n;
        mean.cve += m.cve / n;
        mean.os += m.os / n;
    }
    let mut std = MetricsSummary::default();
    for m in &per_seed {
        std.ie += (m.ie - mean.ie).powi(2) / n;
        std.dl += (m.dl - mean.dl).powi(2) / n;
        std.cve += (m.cve - mean.cve).powi(2) / n;
        std.os += (m.os - mean.os).powi(2) / n;
    }
    std.ie = std.ie.sqrt();
    std.dl = std.dl.sqrt();
    std.cve = std.cve.sqrt();
    std.os = std.os.sqrt();
    AggregateMetrics {
        seeds: seeds.to_vec(),
        per_seed,
        mean,
        std,
    }
}

/// Everything derivable from the config once, shared read-only across
/// seeds and sweep cells.
pub struct Experiment {
    pub config: ExperimentConfig,
    pub pair: TransitionPair,
    pub phantom: Phantom,
    pub ops: Operators,
    /// Ground truth sampled on the reconstruction grid.
    pub truth_temperature: Field,
    /// Noiseless fine-grid forward projection.
    pub noiseless: MeasurementSet,
}

impl Experiment {
    pub fn prepare(config: ExperimentConfig) -> Result<Experiment> {
        config.validate()?;
        let pair = config.transition_pair()?;
        let phantom = config.phantom.resolve()?;
        let ops = Operators::build(&config.geometry, config.grid.recon_pixel_size_cm)?;
        phantom.validate(&ops.grid)?;
        let (truth_temperature, _) = phantom.sample_field(&ops.grid);
        let noiseless = forward_project(
            &phantom,
            &pair,
            &config.geometry,
            config.grid.forward_pixel_size_cm,
        )?;
        Ok(Experiment {
            config,
            pair,
            phantom,
            ops,
            truth_temperature,
            noiseless,
        })
    }

    /// Like [`Experiment::prepare`] but reusing an already-built phantom,
    /// for sweeps that vary only solver parameters.
    pub fn algorithm(&self, which: &str) -> Result<Algorithm> {
        match which {
            "sart" => Ok(Algorithm::Sart(self.config.sart)),
            "retro" => Ok(Algorithm::Retro(self.config.retro)),
            other => Err(TomoError::Config(format!("unknown algorithm '{other}'"))),
        }
    }

    /// Names of the algorithms selected by the config.
    pub fn selected_algorithms(&self) -> Vec<&'static str> {
        match self.config.algorithm.as_str() {
            "sart" => vec!["sart"],
            "retro" => vec!["retro"],
            _ => vec!["sart", "retro"],
        }
    }

    /// One reconstruction at the given noise level and seed.
    pub fn run_one(&self, algo: &Algorithm, snr_db: f64, seed: u64) -> Result<SeedRun> {
        let ms = add_noise(&self.noiseless, snr_db, seed, self.config.noise.model);
        let result = reconstruct_prepared(
            &self.ops,
            &ms,
            &self.pair,
            self.phantom.pressure_atm,
            algo,
        )
        .map_err(|e| TomoError::Solver(format!("seed {seed}: {e}")))?;
        let metrics = evaluate(&result.temperature, &self.truth_temperature, &self.phantom)?;
        Ok(SeedRun {
            seed,
            snr_db,
            metrics,
            result,
        })
    }

    /// Runs every seed (in parallel) and aggregates the metrics. Results
    /// are keyed by seed order, so the output is identical for any
    /// worker count.
    pub fn mean_metrics(
        &self,
        algo: &Algorithm,
        snr_db: f64,
        seeds: &[u64],
    ) -> Result<AggregateMetrics> {
        let per_seed: Result<Vec<MetricsSummary>> = seeds
            .par_iter()
            .map(|&seed| {
                self.run_one(algo, snr_db, seed)
                    .map(|run| MetricsSummary::from(&run.metrics))
            })
            .collect();
        Ok(aggregate(seeds, per_seed?))
    }
}
