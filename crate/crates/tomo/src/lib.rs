//! Two-line TDLAS tomography: simulation, reconstruction and evaluation.
//!
//! The crate reconstructs 2-D temperature fields from line-of-sight
//! laser-absorption path integrals. It provides the full simulation
//! chain: parallel-beam geometry and ray-traced sensitivity matrices,
//! two-line H2O spectroscopy, Gaussian phantoms with fine-grid forward
//! projection and noise injection, a SART baseline and the RETRO joint
//! conic reconstruction, four image-quality metrics, and an experiment
//! harness with parameter sweeps.

pub mod error;
pub mod field;
pub mod geometry;
pub mod harness;
pub mod metrics;
pub mod phantom;
pub mod solvers;
pub mod spectroscopy;

pub use error::{Result, TomoError};
