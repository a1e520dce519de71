//! Experiment harness: configuration, single runs, parameter sweeps and
//! artifact output.

pub mod artifacts;
pub mod config;
pub mod runner;
pub mod sweeps;
