//! First-order difference operator over the active pixels of a masked
//! grid, used as the smoothing penalty in both reconstructions.

use crate::geometry::PixelGrid;

/// Sparse pairwise-difference matrix `F`. One row per adjacent active
/// pixel pair (horizontal and vertical), evaluating to
/// `x[left] - x[right]` resp. `x[down] - x[up]` in grid coordinates.
#[derive(Debug, Clone)]
pub struct DifferenceOperator {
    /// Each row is `(+1 index, -1 index)`.
    rows: Vec<(usize, usize)>,
    n_pixels: usize,
}

impl DifferenceOperator {
    pub fn new(grid: &PixelGrid) -> DifferenceOperator {
        let mut rows = Vec::new();
        for iy in 0..grid.ny() {
            for ix in 0..grid.nx() {
                let Some(here) = grid.active_index(ix, iy) else {
                    continue;
                };
                if ix + 1 < grid.nx() {
                    if let Some(right) = grid.active_index(ix + 1, iy) {
                        rows.push((here, right));
                    }
                }
                if iy + 1 < grid.ny() {
                    if let Some(up) = grid.active_index(ix, iy + 1) {
                        rows.push((here, up));
                    }
                }
            }
        }
        DifferenceOperator {
            rows,
            n_pixels: grid.n_active(),
        }
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_cols(&self) -> usize {
        self.n_pixels
    }

    /// `out = F x`
    pub fn mul(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.n_pixels);
        debug_assert_eq!(out.len(), self.rows.len());
        for (o, &(a, b)) in out.iter_mut().zip(&self.rows) {
            *o = x[a] - x[b];
        }
    }

    /// `out += F^T y`
    pub fn mul_transpose_add(&self, y: &[f64], out: &mut [f64]) {
        debug_assert_eq!(y.len(), self.rows.len());
        debug_assert_eq!(out.len(), self.n_pixels);
        for (&yi, &(a, b)) in y.iter().zip(&self.rows) {
            out[a] += yi;
            out[b] -= yi;
        }
    }

    /// `out += F^T F x` in a single pass.
    pub fn normal_mul_add(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.n_pixels);
        debug_assert_eq!(out.len(), self.n_pixels);
        for &(a, b) in &self.rows {
            let d = x[a] - x[b];
            out[a] += d;
            out[b] -= d;
        }
    }

    /// `||F x||^2`
    pub fn penalty(&self, x: &[f64]) -> f64 {
        self.rows
            .iter()
            .map(|&(a, b)| {
                let d = x[a] - x[b];
                d * d
            })
            .sum()
    }

    /// Diagonal of `F^T F`: the neighbour count of each pixel.
    pub fn degree(&self) -> Vec<f64> {
        let mut d = vec![0.0; self.n_pixels];
        for &(a, b) in &self.rows {
            d[a] += 1.0;
            d[b] += 1.0;
        }
        d
    }
}
