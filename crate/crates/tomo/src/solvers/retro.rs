//! RETRO: joint two-line reconstruction with a relative-entropy coupling
//! term, solved as a barrier problem.
//!
//! The model couples the two absorbance-density images through the
//! per-pixel relative entropy
//!
//! ```text
//! g(a1, a2) = (a1 + a2) ln((a1 + a2) / a1)
//! ```
//!
//! and minimises
//!
//! ```text
//! q(a1) + q(a2) + mu * sum_j tau_j
//! s.t.  a1, a2 > 0,   tau_j >= g(a1_j, a2_j)
//! ```
//!
//! with `q(a) = ||A - L a||^2 + gamma^2 ||F a||^2`. The entropy sum runs
//! over the pixels at least one beam traverses; at data-free pixels the
//! term has nothing to balance against and would pin `a2` to the
//! positivity floor instead of letting the smoothing interpolate it.
//! Because `g >= 0` and `mu > 0`, the epigraph variables are tight at
//! the optimum and can be eliminated analytically inside the barrier
//! (`tau_j = g_j + 1/(t mu)`), which leaves a smooth convex program in
//! `(a1, a2)` alone:
//!
//! ```text
//! phi_t = q(a1) + q(a2) + mu * sum g_j - (1/t) sum (ln a1_j + ln a2_j)
//! ```
//!
//! Each barrier stage is solved by damped Newton; the Newton systems are
//! solved by preconditioned CG with an exact per-pixel 2x2 block
//! preconditioner, which absorbs the ill-conditioning the barrier
//! introduces near the boundary. The duality-gap surrogate `3n/t`
//! (positivity of both images plus the entropy cone, `n` pixels each)
//! drives the stage schedule.

use serde::{Deserialize, Serialize};

use crate::error::{Result, TomoError};
use crate::geometry::SensitivityMatrix;
use crate::solvers::diff::DifferenceOperator;

/// `g(a1, a2) = (a1 + a2) ln((a1 + a2) / a1)`, the per-pixel coupling.
/// Requires `a1 > 0`, `a2 >= 0`.
pub fn relative_entropy(a1: f64, a2: f64) -> f64 {
    let s = a1 + a2;
    s * (s / a1).ln()
}

/// Gradient of [`relative_entropy`] with respect to `(a1, a2)`.
pub fn relative_entropy_grad(a1: f64, a2: f64) -> (f64, f64) {
    let s = a1 + a2;
    let l = (s / a1).ln();
    (l + 1.0 - s / a1, l + 1.0)
}

/// Hessian of [`relative_entropy`] as `(h11, h12, h22)`. Rank one:
/// `H = (1/s) u u^T` with `u = (-a2/a1, 1)`.
pub fn relative_entropy_hess(a1: f64, a2: f64) -> (f64, f64, f64) {
    let s = a1 + a2;
    let r = a2 / a1;
    (r * r / s, -r / s, 1.0 / s)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RetroConfig {
    /// Smoothing weight `gamma` (enters as `gamma^2`).
    pub gamma: f64,
    /// Entropy coupling weight `mu`.
    pub mu: f64,
    /// Target duality-gap surrogate `3n/t`.
    pub gap_tol: f64,
    /// Initial barrier parameter.
    pub t_init: f64,
    /// Barrier growth factor between stages.
    pub t_factor: f64,
    /// The barrier is pushed at least this far regardless of `gap_tol`,
    /// so boundary-bound components settle well below measurement scale.
    pub t_final_min: f64,
    pub max_newton_per_stage: usize,
    pub pcg_rel_tol: f64,
    pub pcg_max_iters: usize,
    /// Strictly positive floor for the initial iterate.
    pub eps_floor: f64,
}

impl Default for RetroConfig {
    fn default() -> Self {
        RetroConfig {
            gamma: 0.01,
            mu: 1e-5,
            gap_tol: 1e-8,
            t_init: 100.0,
            t_factor: 20.0,
            t_final_min: 1e14,
            max_newton_per_stage: 80,
            pcg_rel_tol: 1e-8,
            pcg_max_iters: 500,
            eps_floor: 1e-10,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct RetroDiagnostics {
    pub barrier_stages: usize,
    pub newton_iterations: usize,
    pub pcg_iterations: usize,
    pub t_final: f64,
    /// Duality-gap surrogate `3n/t` at exit.
    pub gap: f64,
    pub converged: bool,
    /// `q1 + q2 + mu sum g` at the final iterate (no barrier term).
    pub objective: f64,
}

#[derive(Debug, Clone)]
pub struct RetroSolution {
    pub a1: Vec<f64>,
    pub a2: Vec<f64>,
    /// Epigraph values at the optimum (`tau_j = g_j`).
    pub tau: Vec<f64>,
    pub diagnostics: RetroDiagnostics,
}

const ARMIJO_C: f64 = 1e-4;
const FEAS_BACKOFF: f64 = 0.99;

/// Shared state for one solve. Vectors of length `2n` hold `[a1; a2]`.
struct Workspace<'a> {
    matrix: &'a SensitivityMatrix,
    diff: &'a DifferenceOperator,
    meas1: &'a [f64],
    meas2: &'a [f64],
    gamma2: f64,
    mu: f64,
    n: usize,
    /// Pixels traversed by at least one beam. The entropy coupling is
    /// applied only there: at data-free pixels it would drag `a2` to the
    /// positivity floor (the measurements never push back), destroying
    /// the ratio the smoothing fill would otherwise interpolate.
    covered: Vec<bool>,
    // scratch
    beam: Vec<f64>,
    pix: Vec<f64>,
}

impl Workspace<'_> {
    /// `q1 + q2 + mu sum g` (no barrier).
    fn objective(&mut self, z: &[f64]) -> f64 {
        let n = self.n;
        let mut f = 0.0;
        for (half, meas) in [(&z[..n], self.meas1), (&z[n..], self.meas2)] {
            self.matrix.mul(half, &mut self.beam);
            f += self
                .beam
                .iter()
                .zip(meas)
                .map(|(p, m)| (m - p) * (m - p))
                .sum::<f64>();
            f += self.gamma2 * self.diff.penalty(half);
        }
        for j in 0..n {
            if self.covered[j] {
                f += self.mu * relative_entropy(z[j], z[n + j]);
            }
        }
        f
    }

    fn barrier_objective(&mut self, z: &[f64], t: f64) -> f64 {
        self.objective(z) - z.iter().map(|a| a.ln()).sum::<f64>() / t
    }

    /// Gradient of the barrier objective.
    fn gradient(&mut self, z: &[f64], t: f64, out: &mut [f64]) {
        let n = self.n;
        for (k, meas) in [(0usize, self.meas1), (1, self.meas2)] {
            let half = &z[k * n..(k + 1) * n];
            self.matrix.mul(half, &mut self.beam);
            for (b, m) in self.beam.iter_mut().zip(meas) {
                *b = 2.0 * (*b - m);
            }
            self.pix.fill(0.0);
            self.matrix.mul_transpose_add(&self.beam, &mut self.pix);
            for (o, p) in out[k * n..(k + 1) * n].iter_mut().zip(&self.pix) {
                *o = *p;
            }
            self.pix.fill(0.0);
            self.diff.normal_mul_add(half, &mut self.pix);
            for (o, p) in out[k * n..(k + 1) * n].iter_mut().zip(&self.pix) {
                *o += 2.0 * self.gamma2 * p;
            }
        }
        for j in 0..self.n {
            if self.covered[j] {
                let (g1, g2) = relative_entropy_grad(z[j], z[n + j]);
                out[j] += self.mu * g1;
                out[n + j] += self.mu * g2;
            }
            out[j] -= 1.0 / (t * z[j]);
            out[n + j] -= 1.0 / (t * z[n + j]);
        }
    }

    /// Per-pixel 2x2 coupling blocks `mu H_g + (1/t) diag(1/a^2)` as
    /// `(h11, h12, h22)` per pixel.
    fn blocks(&self, z: &[f64], t: f64) -> Vec<(f64, f64, f64)> {
        let n = self.n;
        (0..n)
            .map(|j| {
                let (a1, a2) = (z[j], z[n + j]);
                let mu = if self.covered[j] { self.mu } else { 0.0 };
                let (h11, h12, h22) = relative_entropy_hess(a1, a2);
                (
                    mu * h11 + 1.0 / (t * a1 * a1),
                    mu * h12,
                    mu * h22 + 1.0 / (t * a2 * a2),
                )
            })
            .collect()
    }

    /// `out = H v` for the barrier Hessian at the point whose coupling
    /// blocks are given.
    fn hessian_mul(&mut self, blocks: &[(f64, f64, f64)], v: &[f64], out: &mut [f64]) {
        let n = self.n;
        for k in 0..2 {
            let half = &v[k * n..(k + 1) * n];
            self.matrix.mul(half, &mut self.beam);
            self.pix.fill(0.0);
            self.matrix.mul_transpose_add(&self.beam, &mut self.pix);
            for (o, p) in out[k * n..(k + 1) * n].iter_mut().zip(&self.pix) {
                *o = 2.0 * p;
            }
            self.pix.fill(0.0);
            self.diff.normal_mul_add(half, &mut self.pix);
            for (o, p) in out[k * n..(k + 1) * n].iter_mut().zip(&self.pix) {
                *o += 2.0 * self.gamma2 * p;
            }
        }
        for (j, &(h11, h12, h22)) in blocks.iter().enumerate() {
            let (v1, v2) = (v[j], v[n + j]);
            out[j] += h11 * v1 + h12 * v2;
            out[n + j] += h12 * v1 + h22 * v2;
        }
    }
}

/// Solves `H d = b` by PCG with a per-pixel 2x2 block preconditioner.
/// `q_diag` is the diagonal of the quadratic part of `H`. Returns the
/// iteration count.
#[allow(clippy::too_many_arguments)]
fn pcg(
    ws: &mut Workspace<'_>,
    blocks: &[(f64, f64, f64)],
    q_diag: &[f64],
    b: &[f64],
    d: &mut [f64],
    rel_tol: f64,
    max_iters: usize,
) -> usize {
    let n = ws.n;
    let dim = 2 * n;
    // preconditioner: M_j = diag(q) + coupling block, inverted per pixel
    let minv: Vec<(f64, f64, f64)> = (0..n)
        .map(|j| {
            let m11 = q_diag[j] + blocks[j].0;
            let m12 = blocks[j].1;
            let m22 = q_diag[n + j] + blocks[j].2;
            let det = m11 * m22 - m12 * m12;
            (m22 / det, -m12 / det, m11 / det)
        })
        .collect();
    let apply_minv = |r: &[f64], out: &mut [f64]| {
        for (j, &(i11, i12, i22)) in minv.iter().enumerate() {
            out[j] = i11 * r[j] + i12 * r[n + j];
            out[n + j] = i12 * r[j] + i22 * r[n + j];
        }
    };

    d.fill(0.0);
    let mut r = b.to_vec();
    let mut y = vec![0.0; dim];
    apply_minv(&r, &mut y);
    let mut p = y.clone();
    let mut rho: f64 = r.iter().zip(&y).map(|(a, b)| a * b).sum();
    let b_norm = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    if b_norm == 0.0 {
        return 0;
    }
    let mut hp = vec![0.0; dim];
    let mut iters = 0;
    for _ in 0..max_iters {
        iters += 1;
        ws.hessian_mul(blocks, &p, &mut hp);
        let php: f64 = p.iter().zip(&hp).map(|(a, b)| a * b).sum();
        if php <= 0.0 {
            break; // numerical loss of positive definiteness
        }
        let alpha = rho / php;
        for i in 0..dim {
            d[i] += alpha * p[i];
            r[i] -= alpha * hp[i];
        }
        let r_norm = r.iter().map(|v| v * v).sum::<f64>().sqrt();
        if r_norm <= rel_tol * b_norm {
            break;
        }
        apply_minv(&r, &mut y);
        let rho_new: f64 = r.iter().zip(&y).map(|(a, b)| a * b).sum();
        let beta = rho_new / rho;
        rho = rho_new;
        for i in 0..dim {
            p[i] = y[i] + beta * p[i];
        }
    }
    iters
}

/// Joint two-line reconstruction. `a1_meas`/`a2_meas` are the per-beam
/// path integrals of the two transitions over the same beam layout.
pub fn retro_reconstruct(
    matrix: &SensitivityMatrix,
    diff: &DifferenceOperator,
    a1_meas: &[f64],
    a2_meas: &[f64],
    config: &RetroConfig,
) -> Result<RetroSolution> {
    let n = matrix.n_cols();
    let m = matrix.n_rows();
    if a1_meas.len() != m || a2_meas.len() != m {
        return Err(TomoError::Shape(format!(
            "{}/{} measurements for {} beams",
            a1_meas.len(),
            a2_meas.len(),
            m
        )));
    }
    if diff.n_cols() != n {
        return Err(TomoError::Shape(
            "difference operator and sensitivity matrix pixel counts differ".into(),
        ));
    }
    if !(config.mu >= 0.0) || !(config.gamma >= 0.0) {
        return Err(TomoError::Config("gamma and mu must be >= 0".into()));
    }
    if config.t_init <= 0.0 || config.t_factor <= 1.0 {
        return Err(TomoError::Config(
            "barrier schedule needs t_init > 0 and t_factor > 1".into(),
        ));
    }

    let mut ws = Workspace {
        matrix,
        diff,
        meas1: a1_meas,
        meas2: a2_meas,
        gamma2: config.gamma * config.gamma,
        mu: config.mu,
        n,
        covered: matrix.pixel_lengths().iter().map(|&l| l > 0.0).collect(),
        beam: vec![0.0; m],
        pix: vec![0.0; n],
    };

    // diagonal of the quadratic Hessian part, fixed across the solve
    let mut ltl_diag = vec![0.0; n];
    for i in 0..m {
        for &(j, l) in matrix.row(i) {
            ltl_diag[j] += l * l;
        }
    }
    let degree = diff.degree();
    let mut q_diag = vec![0.0; 2 * n];
    for j in 0..n {
        let d = 2.0 * ltl_diag[j] + 2.0 * ws.gamma2 * degree[j];
        q_diag[j] = d;
        q_diag[n + j] = d;
    }

    // strictly feasible start: mean absorbance density per transition
    let mean_density = |meas: &[f64]| {
        let s: f64 = meas
            .iter()
            .zip(matrix.ray_lengths())
            .map(|(a, l)| a.max(0.0) / l)
            .sum();
        (s / m as f64).max(config.eps_floor)
    };
    let mut z = vec![0.0; 2 * n];
    let init1 = mean_density(a1_meas);
    let init2 = mean_density(a2_meas);
    z[..n].fill(init1);
    z[n..].fill(init2);

    let mut t = config.t_init;
    let mut grad = vec![0.0; 2 * n];
    let mut step = vec![0.0; 2 * n];
    let mut cand = vec![0.0; 2 * n];
    let mut stages = 0;
    let mut newton_total = 0;
    let mut pcg_total = 0;
    let mut converged = false;

    for _stage in 0..200 {
        stages += 1;
        let mut phi = ws.barrier_objective(&z, t);
        for _ in 0..config.max_newton_per_stage {
            ws.gradient(&z, t, &mut grad);
            let blocks = ws.blocks(&z, t);
            let neg_grad: Vec<f64> = grad.iter().map(|g| -g).collect();
            pcg_total += pcg(
                &mut ws,
                &blocks,
                &q_diag,
                &neg_grad,
                &mut step,
                config.pcg_rel_tol,
                config.pcg_max_iters,
            );
            let mut slope: f64 = grad.iter().zip(&step).map(|(g, d)| g * d).sum();
            if slope >= 0.0 {
                // fall back to the preconditioned gradient direction
                for j in 0..n {
                    let m11 = q_diag[j] + blocks[j].0;
                    let m22 = q_diag[n + j] + blocks[j].2;
                    step[j] = -grad[j] / m11;
                    step[n + j] = -grad[n + j] / m22;
                }
                slope = grad.iter().zip(&step).map(|(g, d)| g * d).sum();
                if slope >= 0.0 {
                    break;
                }
            }
            newton_total += 1;

            // Newton decrement test (quadratic estimate of remaining gap)
            if -slope * 0.5 <= 1e-12 * (1.0 + phi.abs()) {
                break;
            }

            // keep strictly inside the positive orthant
            let mut alpha: f64 = 1.0;
            for (zi, di) in z.iter().zip(&step) {
                if *di < 0.0 {
                    alpha = alpha.min(-FEAS_BACKOFF * zi / di);
                }
            }
            let mut accepted = false;
            for _ in 0..60 {
                for i in 0..2 * n {
                    cand[i] = z[i] + alpha * step[i];
                }
                let phi_new = ws.barrier_objective(&cand, t);
                if phi_new <= phi + ARMIJO_C * alpha * slope {
                    z.copy_from_slice(&cand);
                    phi = phi_new;
                    accepted = true;
                    break;
                }
                alpha *= 0.5;
            }
            if !accepted {
                break;
            }
        }
        let gap = 3.0 * n as f64 / t;
        if gap <= config.gap_tol && t >= config.t_final_min {
            converged = true;
            break;
        }
        t *= config.t_factor;
    }

    let tau: Vec<f64> = (0..n).map(|j| relative_entropy(z[j], z[n + j])).collect();
    let objective = ws.objective(&z);
    let a2 = z.split_off(n);
    Ok(RetroSolution {
        a1: z,
        a2,
        tau,
        diagnostics: RetroDiagnostics {
            barrier_stages: stages,
            newton_iterations: newton_total,
            pcg_iterations: pcg_total,
            t_final: t,
            gap: 3.0 * n as f64 / t,
            converged,
            objective,
        },
    })
}
