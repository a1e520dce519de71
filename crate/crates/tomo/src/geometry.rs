//! Parallel-beam sensor layout, masked circular pixel grid and the
//! ray-traced sensitivity matrix.
//!
//! Beams are infinitely thin lines clipped to the circular region of
//! interest (RoI). The sensitivity matrix entry `l[i][j]` is the exact
//! Euclidean length of beam `i` inside active pixel `j`, obtained from a
//! parametric grid traversal over the chord. Every point of a chord lies
//! in some cell that intersects the RoI disc, so row sums reproduce the
//! analytic chord length to floating-point accuracy.

use serde::{Deserialize, Serialize};

use crate::error::{Result, TomoError};

/// Circular region of interest.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Disc {
    pub center: (f64, f64),
    pub radius: f64,
}

/// Parallel-beam sensor layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SensorGeometry {
    pub num_projections: usize,
    pub beams_per_projection: usize,
    pub angular_spacing_deg: f64,
    pub beam_spacing_cm: f64,
    /// Emitter-detector distance. Kept for layout rendering only: beams are
    /// clipped to the RoI, where all active pixels live.
    pub emitter_detector_distance_cm: f64,
    pub roi_diameter_cm: f64,
    pub roi_center: (f64, f64),
}

impl Default for SensorGeometry {
    fn default() -> Self {
        SensorGeometry {
            num_projections: 4,
            beams_per_projection: 8,
            angular_spacing_deg: 45.0,
            beam_spacing_cm: 1.8,
            emitter_detector_distance_cm: 36.76,
            roi_diameter_cm: 18.0,
            roi_center: (0.0, 0.0),
        }
    }
}

impl SensorGeometry {
    pub fn roi(&self) -> Disc {
        Disc {
            center: self.roi_center,
            radius: 0.5 * self.roi_diameter_cm,
        }
    }

    pub fn total_beams(&self) -> usize {
        self.num_projections * self.beams_per_projection
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_projections == 0 || self.beams_per_projection == 0 {
            return Err(TomoError::Config(
                "geometry needs at least one projection and one beam".into(),
            ));
        }
        if self.beams_per_projection > 1 && self.beam_spacing_cm <= 0.0 {
            return Err(TomoError::Config("beam spacing must be positive".into()));
        }
        if self.roi_diameter_cm <= 0.0 {
            return Err(TomoError::Config("RoI diameter must be positive".into()));
        }
        if self.emitter_detector_distance_cm < self.roi_diameter_cm {
            return Err(TomoError::Config(
                "emitter-detector distance is shorter than the RoI diameter".into(),
            ));
        }
        Ok(())
    }
}

/// One laser beam: a directed line through the RoI.
#[derive(Debug, Clone, PartialEq)]
pub struct Beam {
    /// Point on the line (the chord midpoint offset from the RoI centre).
    pub origin: (f64, f64),
    /// Unit direction, counter-clockwise angle from +x.
    pub dir: (f64, f64),
    pub projection: usize,
    pub beam_in_projection: usize,
    pub angle_deg: f64,
    /// Signed perpendicular offset from the RoI centre.
    pub offset_cm: f64,
}

/// Lays out `num_projections x beams_per_projection` parallel beams.
///
/// Projection `p` has angle `p * angular_spacing_deg` (beam direction),
/// with beams offset along the perpendicular axis by
/// `(b - (B-1)/2) * beam_spacing_cm`, symmetric about the RoI centre.
pub fn enumerate_beams(geom: &SensorGeometry) -> Result<Vec<Beam>> {
    geom.validate()?;
    let (cx, cy) = geom.roi_center;
    let half = (geom.beams_per_projection as f64 - 1.0) / 2.0;
    let mut beams = Vec::with_capacity(geom.total_beams());
    for p in 0..geom.num_projections {
        let angle_deg = p as f64 * geom.angular_spacing_deg;
        let theta = angle_deg.to_radians();
        let dir = (theta.cos(), theta.sin());
        // offset axis, perpendicular to the beam direction
        let nrm = (-theta.sin(), theta.cos());
        for b in 0..geom.beams_per_projection {
            let offset = (b as f64 - half) * geom.beam_spacing_cm;
            beams.push(Beam {
                origin: (cx + offset * nrm.0, cy + offset * nrm.1),
                dir,
                projection: p,
                beam_in_projection: b,
                angle_deg,
                offset_cm: offset,
            });
        }
    }
    Ok(beams)
}

/// Analytic chord length of a beam through a disc: `2 sqrt(r^2 - d^2)`
/// for perpendicular distance `d < r`, else zero.
pub fn chord_length(beam: &Beam, disc: &Disc) -> f64 {
    let (ox, oy) = beam.origin;
    let (dx, dy) = beam.dir;
    let rx = disc.center.0 - ox;
    let ry = disc.center.1 - oy;
    // perpendicular distance from disc centre to the line
    let d = (rx * dy - ry * dx).abs();
    if d < disc.radius {
        2.0 * (disc.radius * disc.radius - d * d).sqrt()
    } else {
        0.0
    }
}

/// Masked square pixel grid over the RoI bounding box.
///
/// A cell is active when the closed cell intersects the open RoI disc.
/// This guarantees that every chord through the disc is entirely covered
/// by active cells, which keeps sensitivity-matrix row sums exactly equal
/// to the analytic chord lengths. Active cells are densely indexed
/// `0..n_active` with a reversible map to `(ix, iy)` grid coordinates.
#[derive(Debug, Clone)]
pub struct PixelGrid {
    pixel_size: f64,
    nx: usize,
    ny: usize,
    x0: f64,
    y0: f64,
    disc: Disc,
    cell_to_active: Vec<Option<u32>>,
    active_cells: Vec<(u32, u32)>,
}

impl PixelGrid {
    pub fn new(disc: Disc, pixel_size: f64) -> Result<PixelGrid> {
        if pixel_size <= 0.0 || disc.radius <= 0.0 {
            return Err(TomoError::Config(
                "pixel size and RoI radius must be positive".into(),
            ));
        }
        let span = 2.0 * disc.radius;
        let n = (span / pixel_size - 1e-9).ceil().max(1.0) as usize;
        let x0 = disc.center.0 - 0.5 * n as f64 * pixel_size;
        let y0 = disc.center.1 - 0.5 * n as f64 * pixel_size;
        let mut cell_to_active = vec![None; n * n];
        let mut active_cells = Vec::new();
        for iy in 0..n {
            for ix in 0..n {
                let xlo = x0 + ix as f64 * pixel_size;
                let ylo = y0 + iy as f64 * pixel_size;
                // nearest point of the closed cell to the disc centre
                let px = disc.center.0.clamp(xlo, xlo + pixel_size);
                let py = disc.center.1.clamp(ylo, ylo + pixel_size);
                let dist2 = (px - disc.center.0).powi(2) + (py - disc.center.1).powi(2);
                if dist2 < disc.radius * disc.radius {
                    cell_to_active[iy * n + ix] = Some(active_cells.len() as u32);
                    active_cells.push((ix as u32, iy as u32));
                }
            }
        }
        if active_cells.is_empty() {
            return Err(TomoError::Config("grid has no active pixels".into()));
        }
        Ok(PixelGrid {
            pixel_size,
            nx: n,
            ny: n,
            x0,
            y0,
            disc,
            cell_to_active,
            active_cells,
        })
    }

    pub fn pixel_size(&self) -> f64 {
        self.pixel_size
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn disc(&self) -> Disc {
        self.disc
    }

    pub fn n_active(&self) -> usize {
        self.active_cells.len()
    }

    pub fn active_index(&self, ix: usize, iy: usize) -> Option<usize> {
        if ix >= self.nx || iy >= self.ny {
            return None;
        }
        self.cell_to_active[iy * self.nx + ix].map(|k| k as usize)
    }

    pub fn cell_of(&self, active: usize) -> (usize, usize) {
        let (ix, iy) = self.active_cells[active];
        (ix as usize, iy as usize)
    }

    pub fn cell_center(&self, active: usize) -> (f64, f64) {
        let (ix, iy) = self.cell_of(active);
        (
            self.x0 + (ix as f64 + 0.5) * self.pixel_size,
            self.y0 + (iy as f64 + 0.5) * self.pixel_size,
        )
    }

    /// Active index of the cell containing `(x, y)`, if any.
    pub fn active_at_point(&self, x: f64, y: f64) -> Option<usize> {
        let ix = ((x - self.x0) / self.pixel_size).floor();
        let iy = ((y - self.y0) / self.pixel_size).floor();
        if ix < 0.0 || iy < 0.0 {
            return None;
        }
        self.active_index(ix as usize, iy as usize)
    }

    /// True when two grids have identical layout (fields defined on them
    /// are comparable element-wise).
    pub fn same_shape(&self, other: &PixelGrid) -> bool {
        self.pixel_size == other.pixel_size
            && self.nx == other.nx
            && self.ny == other.ny
            && self.x0 == other.x0
            && self.y0 == other.y0
            && self.disc == other.disc
    }
}

const AXIS_EPS: f64 = 1e-12;

/// The fixed 1-d cell indices for an axis-aligned beam at coordinate `v`.
/// A beam riding exactly on a grid line belongs to both adjacent cells;
/// its traversal is split half-and-half between them. The split keeps the
/// tracing symmetric (no systematic half-pixel displacement toward either
/// side) and therefore rotationally consistent; the default layout's
/// axis-aligned beams all ride grid lines, so this case is the norm, not
/// the exception.
fn axis_cells(v: f64, lo: f64, step: f64, n: usize) -> Vec<usize> {
    let u = (v - lo) / step;
    let r = u.round();
    let candidates: &[i64] = if (u - r).abs() < 1e-9 {
        &[r as i64 - 1, r as i64]
    } else {
        &[u.floor() as i64]
    };
    candidates
        .iter()
        .filter(|&&i| i >= 0 && i < n as i64)
        .map(|&i| i as usize)
        .collect()
}

/// Traces one beam through the grid, returning `(active_pixel, length)`
/// contributions over the RoI chord, sorted by pixel index.
/// Contributions in inactive cells are dropped (none arise for chords
/// through the disc, by the mask choice).
pub fn trace_beam(beam: &Beam, grid: &PixelGrid) -> Vec<(usize, f64)> {
    let (dx, dy) = beam.dir;
    let mut parts: Vec<(usize, f64)> = if dx.abs() <= AXIS_EPS {
        let cells = axis_cells(beam.origin.0, grid.x0, grid.pixel_size, grid.nx);
        let w = 1.0 / cells.len().max(1) as f64;
        cells
            .iter()
            .flat_map(|&ix| trace_beam_inner(beam, grid, Some(ix), None, w))
            .collect()
    } else if dy.abs() <= AXIS_EPS {
        let cells = axis_cells(beam.origin.1, grid.y0, grid.pixel_size, grid.ny);
        let w = 1.0 / cells.len().max(1) as f64;
        cells
            .iter()
            .flat_map(|&iy| trace_beam_inner(beam, grid, None, Some(iy), w))
            .collect()
    } else {
        trace_beam_inner(beam, grid, None, None, 1.0)
    };
    parts.sort_unstable_by_key(|&(j, _)| j);
    let mut out: Vec<(usize, f64)> = Vec::with_capacity(parts.len());
    for (j, l) in parts {
        match out.last_mut() {
            Some((jj, ll)) if *jj == j => *ll += l,
            _ => out.push((j, l)),
        }
    }
    out
}

fn trace_beam_inner(
    beam: &Beam,
    grid: &PixelGrid,
    fixed_ix: Option<usize>,
    fixed_iy: Option<usize>,
    weight: f64,
) -> Vec<(usize, f64)> {
    let disc = grid.disc;
    let (ox, oy) = beam.origin;
    let (dx, dy) = beam.dir;
    // chord endpoints: |o + t d - c|^2 = r^2 with unit d
    let fx = ox - disc.center.0;
    let fy = oy - disc.center.1;
    let b = fx * dx + fy * dy;
    let c = fx * fx + fy * fy - disc.radius * disc.radius;
    let det = b * b - c;
    if det <= 0.0 {
        return Vec::new();
    }
    let t_in = -b - det.sqrt();
    let t_out = -b + det.sqrt();

    let ps = grid.pixel_size;
    let mut ts: Vec<f64> = vec![t_in, t_out];
    if dx.abs() > AXIS_EPS {
        let (xa, xb) = (ox + t_in * dx, ox + t_out * dx);
        let (xmin, xmax) = (xa.min(xb), xa.max(xb));
        let i_lo = ((xmin - grid.x0) / ps).ceil() as i64;
        let i_hi = ((xmax - grid.x0) / ps).floor() as i64;
        for i in i_lo..=i_hi {
            let t = (grid.x0 + i as f64 * ps - ox) / dx;
            if t > t_in && t < t_out {
                ts.push(t);
            }
        }
    }
    if dy.abs() > AXIS_EPS {
        let (ya, yb) = (oy + t_in * dy, oy + t_out * dy);
        let (ymin, ymax) = (ya.min(yb), ya.max(yb));
        let i_lo = ((ymin - grid.y0) / ps).ceil() as i64;
        let i_hi = ((ymax - grid.y0) / ps).floor() as i64;
        for i in i_lo..=i_hi {
            let t = (grid.y0 + i as f64 * ps - oy) / dy;
            if t > t_in && t < t_out {
                ts.push(t);
            }
        }
    }
    ts.sort_by(|a, b| a.partial_cmp(b).unwrap());

    let mut out: Vec<(usize, f64)> = Vec::with_capacity(ts.len());
    for w in ts.windows(2) {
        let (ta, tb) = (w[0], w[1]);
        let len = (tb - ta) * weight;
        if len <= 1e-14 {
            continue;
        }
        let tm = 0.5 * (ta + tb);
        let ix = match fixed_ix {
            Some(i) => i,
            None => {
                let u = ((ox + tm * dx - grid.x0) / ps).floor();
                if u < 0.0 || u >= grid.nx as f64 {
                    continue;
                }
                u as usize
            }
        };
        let iy = match fixed_iy {
            Some(i) => i,
            None => {
                let u = ((oy + tm * dy - grid.y0) / ps).floor();
                if u < 0.0 || u >= grid.ny as f64 {
                    continue;
                }
                u as usize
            }
        };
        if let Some(j) = grid.active_index(ix, iy) {
            match out.last_mut() {
                Some((jj, l)) if *jj == j => *l += len,
                _ => out.push((j, len)),
            }
        }
    }
    out
}

/// Sparse beam-by-pixel chord-length matrix with per-beam totals
/// (`l_ray`) and per-pixel totals (`l_pixel`).
#[derive(Debug, Clone)]
pub struct SensitivityMatrix {
    rows: Vec<Vec<(usize, f64)>>,
    ray_lengths: Vec<f64>,
    pixel_lengths: Vec<f64>,
    n_pixels: usize,
}

/// Ray-traces every beam over the grid. A beam whose RoI chord is zero is
/// rejected: it would contribute an all-zero, uninformative row.
pub fn build_sensitivity(beams: &[Beam], grid: &PixelGrid) -> Result<SensitivityMatrix> {
    if beams.is_empty() {
        return Err(TomoError::Input("no beams supplied".into()));
    }
    let disc = grid.disc;
    let mut rows = Vec::with_capacity(beams.len());
    let mut ray_lengths = Vec::with_capacity(beams.len());
    let mut pixel_lengths = vec![0.0; grid.n_active()];
    for (i, beam) in beams.iter().enumerate() {
        if chord_length(beam, &disc) == 0.0 {
            return Err(TomoError::Geometry(format!(
                "beam {i} (projection {}, beam {}) misses the RoI",
                beam.projection, beam.beam_in_projection
            )));
        }
        let row = trace_beam(beam, grid);
        let mut sum = 0.0;
        for &(j, l) in &row {
            pixel_lengths[j] += l;
            sum += l;
        }
        ray_lengths.push(sum);
        rows.push(row);
    }
    Ok(SensitivityMatrix {
        rows,
        ray_lengths,
        pixel_lengths,
        n_pixels: grid.n_active(),
    })
}

impl SensitivityMatrix {
    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_cols(&self) -> usize {
        self.n_pixels
    }

    pub fn row(&self, i: usize) -> &[(usize, f64)] {
        &self.rows[i]
    }

    /// Per-beam chord totals `l_ray`.
    pub fn ray_lengths(&self) -> &[f64] {
        &self.ray_lengths
    }

    /// Per-pixel traversal totals `l_pixel`.
    pub fn pixel_lengths(&self) -> &[f64] {
        &self.pixel_lengths
    }

    /// `out = L a`
    pub fn mul(&self, a: &[f64], out: &mut [f64]) {
        debug_assert_eq!(a.len(), self.n_pixels);
        debug_assert_eq!(out.len(), self.rows.len());
        for (oi, row) in out.iter_mut().zip(&self.rows) {
            let mut s = 0.0;
            for &(j, l) in row {
                s += l * a[j];
            }
            *oi = s;
        }
    }

    /// `out += L^T r` (caller zeroes `out` when needed)
    pub fn mul_transpose_add(&self, r: &[f64], out: &mut [f64]) {
        debug_assert_eq!(r.len(), self.rows.len());
        debug_assert_eq!(out.len(), self.n_pixels);
        for (ri, row) in r.iter().zip(&self.rows) {
            for &(j, l) in row {
                out[j] += l * ri;
            }
        }
    }
}
