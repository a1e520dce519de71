//! Shared fixtures for the integration suites: a brute-force-solvable
//! instance and two optimisation oracles that share no code with the
//! production solver.

#![allow(dead_code)]

use tdlas_tomo::geometry::{
    build_sensitivity, enumerate_beams, PixelGrid, SensitivityMatrix, SensorGeometry,
};
use tdlas_tomo::solvers::retro::relative_entropy;
use tdlas_tomo::solvers::DifferenceOperator;

/// 3x3 grid (9 active pixels, 18 unknowns) crossed by 9 beams. Small
/// enough for dense linear algebra and exhaustive per-pixel search.
pub fn tiny_setup() -> (PixelGrid, SensitivityMatrix, DifferenceOperator) {
    let geom = SensorGeometry {
        num_projections: 3,
        beams_per_projection: 3,
        angular_spacing_deg: 60.0,
        beam_spacing_cm: 1.2,
        emitter_detector_distance_cm: 10.0,
        roi_diameter_cm: 3.6,
        roi_center: (0.0, 0.0),
    };
    let grid = PixelGrid::new(geom.roi(), 1.2).unwrap();
    let beams = enumerate_beams(&geom).unwrap();
    let matrix = build_sensitivity(&beams, &grid).unwrap();
    let diff = DifferenceOperator::new(&grid);
    (grid, matrix, diff)
}

pub fn smooth_truth(grid: &PixelGrid, base: f64, amp: f64) -> Vec<f64> {
    (0..grid.n_active())
        .map(|j| {
            let (x, y) = grid.cell_center(j);
            base + amp * (-(x * x + y * y) / 2.0).exp()
        })
        .collect()
}

/// Dense column extraction of a linear operator given as `out += Op x`.
fn dense_columns(n: usize, mut apply: impl FnMut(&[f64], &mut [f64])) -> Vec<Vec<f64>> {
    (0..n)
        .map(|col| {
            let mut e = vec![0.0; n];
            e[col] = 1.0;
            let mut out = vec![0.0; n];
            apply(&e, &mut out);
            out
        })
        .collect()
}

/// The full reconstruction objective
/// `||m1 - L a1||^2 + ||m2 - L a2||^2 + gamma^2 (||F a1||^2 + ||F a2||^2)
///  + mu * sum_covered g(a1_j, a2_j)`,
/// recomputed from scratch (no incremental state).
#[allow(clippy::too_many_arguments)]
pub fn full_objective(
    matrix: &SensitivityMatrix,
    diff: &DifferenceOperator,
    m1: &[f64],
    m2: &[f64],
    gamma: f64,
    mu: f64,
    covered: &[bool],
    a1: &[f64],
    a2: &[f64],
) -> f64 {
    let mut f = 0.0;
    let mut beam = vec![0.0; matrix.n_rows()];
    for (a, m) in [(a1, m1), (a2, m2)] {
        matrix.mul(a, &mut beam);
        f += beam
            .iter()
            .zip(m)
            .map(|(p, mi)| (mi - p) * (mi - p))
            .sum::<f64>();
        f += gamma * gamma * diff.penalty(a);
    }
    for j in 0..a1.len() {
        if covered[j] {
            f += mu * relative_entropy(a1[j], a2[j]);
        }
    }
    f
}

/// Brute-force refinement oracle: cyclic per-pixel minimisation of the
/// full objective over the pair `(a1_j, a2_j)` by nested grid search.
///
/// With all other pixels frozen, the data and smoothing terms restrict
/// to independent parabolas in `a1_j` and `a2_j`; only the entropy
/// couples the pair. The 2-D search is exhaustive on each level and the
/// window shrinks geometrically, so every pixel visit is a global
/// minimisation of the restricted problem — no gradients, no solver
/// machinery. Cyclic exact minimisation of a strictly convex smooth
/// function converges to its global minimum.
pub struct RefineOracle {
    /// Columns of the sensitivity matrix.
    l_cols: Vec<Vec<f64>>,
    /// Dense `F^T F`.
    ftf: Vec<Vec<f64>>,
    gamma2: f64,
    mu: f64,
    pub covered: Vec<bool>,
}

impl RefineOracle {
    pub fn new(
        matrix: &SensitivityMatrix,
        diff: &DifferenceOperator,
        gamma: f64,
        mu: f64,
    ) -> RefineOracle {
        let n = matrix.n_cols();
        let l_cols = (0..n)
            .map(|col| {
                let mut e = vec![0.0; n];
                e[col] = 1.0;
                let mut out = vec![0.0; matrix.n_rows()];
                matrix.mul(&e, &mut out);
                out
            })
            .collect();
        let ftf = dense_columns(n, |x, out| diff.normal_mul_add(x, out));
        RefineOracle {
            l_cols,
            ftf,
            gamma2: gamma * gamma,
            mu,
            covered: matrix.pixel_lengths().iter().map(|&l| l > 0.0).collect(),
        }
    }

    pub fn run(
        &self,
        matrix: &SensitivityMatrix,
        diff: &DifferenceOperator,
        m1: &[f64],
        m2: &[f64],
        init: f64,
        cycles: usize,
    ) -> (Vec<f64>, Vec<f64>) {
        let n = self.l_cols.len();
        let mut a1 = vec![init; n];
        let mut a2 = vec![init; n];
        // Residuals r = m - L a and smoothing images s = F^T F a, kept
        // incrementally; a single pixel update touches one column each.
        let mut r1 = residual(matrix, m1, &a1);
        let mut r2 = residual(matrix, m2, &a2);
        let mut s1 = ftf_apply(&self.ftf, &a1);
        let mut s2 = ftf_apply(&self.ftf, &a2);

        let mut prev = f64::INFINITY;
        for cycle in 0..cycles {
            if cycle % 256 == 255 {
                // rebuild the incremental state to stop drift from
                // accumulating over thousands of rank-one updates
                r1 = residual(matrix, m1, &a1);
                r2 = residual(matrix, m2, &a2);
                s1 = ftf_apply(&self.ftf, &a1);
                s2 = ftf_apply(&self.ftf, &a2);
            }
            for j in 0..n {
                let (du, dv) = self.refine_pixel(j, &a1, &a2, &r1, &r2, &s1, &s2);
                if du != 0.0 {
                    for (ri, &lij) in r1.iter_mut().zip(&self.l_cols[j]) {
                        *ri -= lij * du;
                    }
                    for (si, row) in s1.iter_mut().zip(&self.ftf) {
                        *si += row[j] * du;
                    }
                    a1[j] += du;
                }
                if dv != 0.0 {
                    for (ri, &lij) in r2.iter_mut().zip(&self.l_cols[j]) {
                        *ri -= lij * dv;
                    }
                    for (si, row) in s2.iter_mut().zip(&self.ftf) {
                        *si += row[j] * dv;
                    }
                    a2[j] += dv;
                }
            }
            let f = full_objective(
                matrix,
                diff,
                m1,
                m2,
                self.gamma2.sqrt(),
                self.mu,
                &self.covered,
                &a1,
                &a2,
            );
            if prev - f < 1e-16 * f.abs().max(1e-300) {
                break;
            }
            prev = f;
        }
        (a1, a2)
    }

    /// Global minimisation of the objective restricted to pixel `j`,
    /// returning the step `(da1_j, da2_j)` from the current values.
    #[allow(clippy::too_many_arguments)]
    fn refine_pixel(
        &self,
        j: usize,
        a1: &[f64],
        a2: &[f64],
        r1: &[f64],
        r2: &[f64],
        s1: &[f64],
        s2: &[f64],
    ) -> (f64, f64) {
        // Restricted objective in the steps (du, dv), dropping constants:
        //   qu(du) = au du^2 + bu du, with
        //   au = sum_i L_ij^2 + gamma^2 (F^T F)_jj
        //   bu = -2 sum_i L_ij r1_i + 2 gamma^2 (F^T F a1)_j
        // and the same for dv on line 2, plus mu g(a1_j+du, a2_j+dv).
        let col = &self.l_cols[j];
        let lc2: f64 = col.iter().map(|l| l * l).sum();
        let au = lc2 + self.gamma2 * self.ftf[j][j];
        let bu =
            -2.0 * col.iter().zip(r1).map(|(l, r)| l * r).sum::<f64>() + 2.0 * self.gamma2 * s1[j];
        let bv =
            -2.0 * col.iter().zip(r2).map(|(l, r)| l * r).sum::<f64>() + 2.0 * self.gamma2 * s2[j];
        let (u0, v0) = (a1[j], a2[j]);
        let mu = if self.covered[j] { self.mu } else { 0.0 };
        let local = |u: f64, v: f64| -> f64 {
            if u < 0.0 || v < 0.0 || (v > 0.0 && u <= 0.0) {
                return f64::INFINITY;
            }
            let (du, dv) = (u - u0, v - v0);
            let mut f = au * du * du + bu * du + au * dv * dv + bv * dv;
            if mu > 0.0 {
                f += mu * relative_entropy(u.max(1e-300), v);
            }
            f
        };

        // Nested grid search: 17x17 points per level, window recentred
        // on the best point and shrunk to two grid steps per side.
        const PTS: usize = 17;
        let span0 = 2.0 * (u0.abs() + v0.abs() + 1e-3);
        let (mut cu, mut cv) = (u0, v0);
        let (mut su, mut sv) = (span0, span0);
        let mut best = local(cu, cv);
        for _ in 0..24 {
            let (mut nu, mut nv) = (cu, cv);
            for iu in 0..PTS {
                let u = (cu - su + 2.0 * su * iu as f64 / (PTS - 1) as f64).max(0.0);
                for iv in 0..PTS {
                    let v = (cv - sv + 2.0 * sv * iv as f64 / (PTS - 1) as f64).max(0.0);
                    let f = local(u, v);
                    if f < best {
                        best = f;
                        nu = u;
                        nv = v;
                    }
                }
            }
            cu = nu;
            cv = nv;
            su *= 2.0 / (PTS - 1) as f64 * 2.0;
            sv = su;
        }
        (cu - u0, cv - v0)
    }
}

pub fn residual(matrix: &SensitivityMatrix, m: &[f64], a: &[f64]) -> Vec<f64> {
    let mut p = vec![0.0; matrix.n_rows()];
    matrix.mul(a, &mut p);
    m.iter().zip(&p).map(|(mi, pi)| mi - pi).collect()
}

fn ftf_apply(ftf: &[Vec<f64>], x: &[f64]) -> Vec<f64> {
    ftf.iter()
        .map(|row| row.iter().zip(x).map(|(rij, xj)| rij * xj).sum())
        .collect()
}

/// Projected-gradient solve of `min ||m - L a||^2 + gamma^2 ||F a||^2`
/// over `a >= 0`, with the step set by a power-iteration estimate of
/// the Hessian norm. Run far past the accuracy needed.
pub fn projected_gradient_tikhonov(
    matrix: &SensitivityMatrix,
    diff: &DifferenceOperator,
    m: &[f64],
    gamma: f64,
) -> Vec<f64> {
    let n = matrix.n_cols();
    let g2 = gamma * gamma;
    let hess = |x: &[f64], out: &mut [f64]| {
        let mut beam = vec![0.0; matrix.n_rows()];
        matrix.mul(x, &mut beam);
        out.iter_mut().for_each(|o| *o = 0.0);
        matrix.mul_transpose_add(&beam, out);
        let mut smooth = vec![0.0; n];
        diff.normal_mul_add(x, &mut smooth);
        for (o, s) in out.iter_mut().zip(&smooth) {
            *o = 2.0 * (*o + g2 * s);
        }
    };

    // power iteration for the Lipschitz constant of the gradient
    let mut v = vec![1.0; n];
    let mut hv = vec![0.0; n];
    let mut lip = 1.0;
    for _ in 0..200 {
        hess(&v, &mut hv);
        lip = hv.iter().map(|x| x * x).sum::<f64>().sqrt();
        for (vi, hvi) in v.iter_mut().zip(&hv) {
            *vi = hvi / lip;
        }
    }
    let step = 1.0 / (1.05 * lip);

    let mut a = vec![0.0; n];
    let mut grad = vec![0.0; n];
    let mut rhs = vec![0.0; n];
    matrix.mul_transpose_add(m, &mut rhs);
    let scale = m.iter().fold(0.0f64, |acc, x| acc.max(x.abs())).max(1e-12);
    for _ in 0..500_000 {
        hess(&a, &mut grad);
        let mut moved = 0.0f64;
        for j in 0..n {
            let g = grad[j] - 2.0 * rhs[j];
            let next = (a[j] - step * g).max(0.0);
            moved = moved.max((next - a[j]).abs());
            a[j] = next;
        }
        if moved < 1e-15 * scale {
            break;
        }
    }
    a
}
