//! SART baseline: length-weighted simultaneous reconstruction with a
//! smoothing penalty and a non-negativity projection.
//!
//! Each sweep moves along the preconditioned negative gradient of
//!
//! ```text
//! f(a) = || A - L a ||^2_W + lambda || F a ||^2 ,   W = diag(1 / l_ray)
//! ```
//!
//! with the classic SART scaling `C = diag(1 / l_pixel)` applied to the
//! whole bracket, followed by projection onto `a >= 0`. The step length
//! eta is chosen by Armijo backtracking from 1, which keeps the iteration
//! monotone in `f` for any penalty weight.

use serde::{Deserialize, Serialize};

use crate::error::{Result, TomoError};
use crate::geometry::SensitivityMatrix;
use crate::solvers::diff::DifferenceOperator;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SartConfig {
    /// Smoothing weight `lambda`.
    pub lambda: f64,
    pub max_iterations: usize,
    /// Stop when the relative iterate change drops below this.
    pub rel_tol: f64,
}

impl Default for SartConfig {
    fn default() -> Self {
        SartConfig {
            lambda: 0.1,
            max_iterations: 2000,
            rel_tol: 1e-6,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SartDiagnostics {
    pub iterations: usize,
    pub converged: bool,
    pub objective: f64,
}

const ARMIJO_C: f64 = 1e-4;

struct Problem<'a> {
    matrix: &'a SensitivityMatrix,
    diff: &'a DifferenceOperator,
    measurements: &'a [f64],
    lambda: f64,
    w: Vec<f64>,
    c: Vec<f64>,
}

impl Problem<'_> {
    fn objective(&self, a: &[f64], residual: &mut [f64]) -> f64 {
        self.matrix.mul(a, residual);
        let mut f = 0.0;
        for ((r, &meas), &w) in residual.iter_mut().zip(self.measurements).zip(&self.w) {
            *r = meas - *r;
            f += w * *r * *r;
        }
        f + self.lambda * self.diff.penalty(a)
    }
}

/// Runs SART for one transition. Returns the reconstructed absorbance
/// density over active pixels.
pub fn sart_reconstruct(
    matrix: &SensitivityMatrix,
    diff: &DifferenceOperator,
    measurements: &[f64],
    config: &SartConfig,
) -> Result<(Vec<f64>, SartDiagnostics)> {
    if measurements.len() != matrix.n_rows() {
        return Err(TomoError::Shape(format!(
            "{} measurements for {} beams",
            measurements.len(),
            matrix.n_rows()
        )));
    }
    if diff.n_cols() != matrix.n_cols() {
        return Err(TomoError::Shape(
            "difference operator and sensitivity matrix pixel counts differ".into(),
        ));
    }
    if !(config.lambda >= 0.0) || !config.lambda.is_finite() {
        return Err(TomoError::Config("lambda must be finite and >= 0".into()));
    }
    let n = matrix.n_cols();
    let m = matrix.n_rows();

    let w: Vec<f64> = matrix.ray_lengths().iter().map(|&l| 1.0 / l).collect();
    // per-pixel scaling; untraversed pixels get the mean traversed scale
    // so the smoothing term can still move them
    let traversed: Vec<f64> = matrix
        .pixel_lengths()
        .iter()
        .copied()
        .filter(|&l| l > 0.0)
        .collect();
    if traversed.is_empty() {
        return Err(TomoError::Geometry("no beam traverses any pixel".into()));
    }
    let fallback = 1.0 / (traversed.iter().sum::<f64>() / traversed.len() as f64);
    let c: Vec<f64> = matrix
        .pixel_lengths()
        .iter()
        .map(|&l| if l > 0.0 { 1.0 / l } else { fallback })
        .collect();

    let prob = Problem {
        matrix,
        diff,
        measurements,
        lambda: config.lambda,
        w,
        c,
    };

    let mut a = vec![0.0; n];
    let mut residual = vec![0.0; m];
    let mut f = prob.objective(&a, &mut residual);

    let mut direction = vec![0.0; n];
    let mut candidate = vec![0.0; n];
    let mut cand_residual = vec![0.0; m];
    let mut iterations = 0;
    let mut converged = false;

    for _ in 0..config.max_iterations {
        iterations += 1;
        // residual currently matches `a`; d = C (L^T W r - lambda F^T F a)
        direction.fill(0.0);
        let wr: Vec<f64> = residual.iter().zip(&prob.w).map(|(r, w)| r * w).collect();
        prob.matrix.mul_transpose_add(&wr, &mut direction);
        let mut ffa = vec![0.0; n];
        prob.diff.normal_mul_add(&a, &mut ffa);
        for j in 0..n {
            direction[j] = prob.c[j] * (direction[j] - config.lambda * ffa[j]);
        }

        // gradient of f at a (for the Armijo decrease test)
        let grad: Vec<f64> = (0..n).map(|j| -2.0 * direction[j] / prob.c[j]).collect();

        let mut eta = 1.0;
        let mut accepted = false;
        for _ in 0..60 {
            for j in 0..n {
                candidate[j] = (a[j] + eta * direction[j]).max(0.0);
            }
            let f_new = prob.objective(&candidate, &mut cand_residual);
            let slope: f64 = grad
                .iter()
                .zip(&candidate)
                .zip(&a)
                .map(|((g, cn), av)| g * (cn - av))
                .sum();
            if f_new <= f + ARMIJO_C * slope {
                accepted = true;
                f = f_new;
                break;
            }
            eta *= 0.5;
        }
        if !accepted {
            // no descent direction left: numerically at a stationary point
            converged = true;
            break;
        }

        let mut delta = 0.0;
        let mut norm = 0.0;
        for j in 0..n {
            delta += (candidate[j] - a[j]).powi(2);
            norm += candidate[j] * candidate[j];
        }
        std::mem::swap(&mut a, &mut candidate);
        std::mem::swap(&mut residual, &mut cand_residual);
        if delta.sqrt() <= config.rel_tol * norm.sqrt().max(1e-30) {
            converged = true;
            break;
        }
    }

    Ok((
        a,
        SartDiagnostics {
            iterations,
            converged,
            objective: f,
        },
    ))
}
