//! Reconstruction algorithms and the measurement-to-temperature
//! pipeline.

pub mod diff;
pub mod retro;
pub mod sart;

use std::sync::Arc;

use crate::error::{Result, TomoError};
use crate::field::Field;
use crate::geometry::{build_sensitivity, enumerate_beams, PixelGrid, SensitivityMatrix, SensorGeometry};
use crate::phantom::MeasurementSet;
use crate::spectroscopy::{fields_to_concentration, fields_to_temperature, PixelFlag, TransitionPair};

pub use diff::DifferenceOperator;
pub use retro::{retro_reconstruct, RetroConfig, RetroDiagnostics, RetroSolution};
pub use sart::{sart_reconstruct, SartConfig, SartDiagnostics};

/// Which reconstruction to run, with its tuning parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Algorithm {
    Sart(SartConfig),
    Retro(RetroConfig),
}

impl Algorithm {
    pub fn name(&self) -> &'static str {
        match self {
            Algorithm::Sart(_) => "sart",
            Algorithm::Retro(_) => "retro",
        }
    }
}

/// Solver run summary attached to a reconstruction.
#[derive(Debug, Clone, Copy)]
pub enum SolveInfo {
    Sart {
        line1: SartDiagnostics,
        line2: SartDiagnostics,
    },
    Retro(RetroDiagnostics),
}

/// Everything a reconstruction produces: both absorbance-density images,
/// the retrieved temperature and concentration, and per-pixel validity.
#[derive(Debug, Clone)]
pub struct ReconstructionResult {
    pub a1: Field,
    pub a2: Field,
    pub temperature: Field,
    pub concentration: Field,
    pub flags: Vec<PixelFlag>,
    pub info: SolveInfo,
}

/// Precomputed per-geometry operators, reusable across solves.
///
/// All active pixels stay in the unknown set, including the ones no
/// beam traverses: those carry no data term, so the smoothing penalty
/// interpolates them from their neighbours. Dropping them instead would
/// punch ambient-valued holes right through reconstructed structures
/// (the sensor's beam offsets leave a data-free disc around the RoI
/// centre).
#[derive(Debug, Clone)]
pub struct Operators {
    pub grid: Arc<PixelGrid>,
    pub matrix: SensitivityMatrix,
    pub diff: DifferenceOperator,
}

impl Operators {
    pub fn build(geom: &SensorGeometry, pixel_size: f64) -> Result<Operators> {
        let grid = Arc::new(PixelGrid::new(geom.roi(), pixel_size)?);
        let beams = enumerate_beams(geom)?;
        let matrix = build_sensitivity(&beams, &grid)?;
        let diff = DifferenceOperator::new(&grid);
        Ok(Operators { grid, matrix, diff })
    }
}

/// Reconstructs both absorbance-density images from one measurement set
/// and converts them to temperature and concentration.
pub fn reconstruct_prepared(
    ops: &Operators,
    ms: &MeasurementSet,
    pair: &TransitionPair,
    pressure_atm: f64,
    algorithm: &Algorithm,
) -> Result<ReconstructionResult> {
    if ms.len() != ops.matrix.n_rows() {
        return Err(TomoError::Shape(format!(
            "{} measurements but the geometry has {} beams",
            ms.len(),
            ops.matrix.n_rows()
        )));
    }
    let (v1, v2, info) = match algorithm {
        Algorithm::Sart(cfg) => {
            let (v1, d1) = sart_reconstruct(&ops.matrix, &ops.diff, &ms.a1, cfg)?;
            let (v2, d2) = sart_reconstruct(&ops.matrix, &ops.diff, &ms.a2, cfg)?;
            (v1, v2, SolveInfo::Sart { line1: d1, line2: d2 })
        }
        Algorithm::Retro(cfg) => {
            let sol = retro_reconstruct(&ops.matrix, &ops.diff, &ms.a1, &ms.a2, cfg)?;
            let diag = sol.diagnostics;
            (sol.a1, sol.a2, SolveInfo::Retro(diag))
        }
    };
    let a1 = Field::new(Arc::clone(&ops.grid), v1)?;
    let a2 = Field::new(Arc::clone(&ops.grid), v2)?;
    let (temperature, flags) = fields_to_temperature(&a1, &a2, pair)?;
    let concentration = fields_to_concentration(&a1, &temperature, &flags, pressure_atm, pair)?;
    Ok(ReconstructionResult {
        a1,
        a2,
        temperature,
        concentration,
        flags,
        info,
    })
}

/// Convenience wrapper that builds the operators on the fly.
pub fn reconstruct(
    geom: &SensorGeometry,
    pixel_size: f64,
    ms: &MeasurementSet,
    pair: &TransitionPair,
    pressure_atm: f64,
    algorithm: &Algorithm,
) -> Result<ReconstructionResult> {
    let ops = Operators::build(geom, pixel_size)?;
    reconstruct_prepared(&ops, ms, pair, pressure_atm, algorithm)
}
