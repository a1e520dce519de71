//! Image-quality metrics: image error (IE), dislocation (DL), centroid
//! value error (CVE) and overshoot (OS).

use crate::error::{Result, TomoError};
use crate::field::Field;
use crate::geometry::PixelGrid;
use crate::phantom::Phantom;

/// Per-blob detail backing the DL/CVE means.
#[derive(Debug, Clone)]
pub struct BlobDetail {
    pub true_center: (f64, f64),
    pub recon_centroid: (f64, f64),
    pub dislocation: f64,
    pub centroid_value_error: f64,
    /// Set when the blob's partition carried no above-ambient weight.
    pub degenerate: bool,
}

/// The four metrics plus per-blob details.
#[derive(Debug, Clone)]
pub struct MetricReport {
    pub ie: f64,
    pub dl: f64,
    pub cve: f64,
    pub os: f64,
    pub blobs: Vec<BlobDetail>,
}

/// Relative L2 error over active pixels: `||rec - true|| / ||true||`.
pub fn image_error(t_rec: &Field, t_true: &Field) -> Result<f64> {
    t_rec.check_same_grid(t_true)?;
    let mut num = 0.0;
    let mut den = 0.0;
    for (&r, &t) in t_rec.values().iter().zip(t_true.values()) {
        num += (r - t) * (r - t);
        den += t * t;
    }
    Ok(num.sqrt() / den.sqrt())
}

/// Weighted centroid of each blob's nearest-centre partition, using the
/// above-ambient excess `(T - ambient)+` as weight. Returns one centroid
/// per blob plus a degeneracy flag (zero total weight falls back to the
/// partition's geometric centre).
fn blob_centroids(
    t_rec: &Field,
    phantom: &Phantom,
    grid: &PixelGrid,
) -> Vec<((f64, f64), bool)> {
    let k = phantom.blobs.len();
    let mut wsum = vec![0.0; k];
    let mut wx = vec![0.0; k];
    let mut wy = vec![0.0; k];
    let mut gsum = vec![0.0; k];
    let mut gx = vec![0.0; k];
    let mut gy = vec![0.0; k];
    for j in 0..grid.n_active() {
        let (x, y) = grid.cell_center(j);
        let owner = (0..k)
            .min_by(|&a, &b| {
                let da = (x - phantom.blobs[a].center.0).powi(2)
                    + (y - phantom.blobs[a].center.1).powi(2);
                let db = (x - phantom.blobs[b].center.0).powi(2)
                    + (y - phantom.blobs[b].center.1).powi(2);
                da.partial_cmp(&db).unwrap()
            })
            .unwrap();
        let w = (t_rec.values()[j] - phantom.ambient_temperature_k).max(0.0);
        wsum[owner] += w;
        wx[owner] += w * x;
        wy[owner] += w * y;
        gsum[owner] += 1.0;
        gx[owner] += x;
        gy[owner] += y;
    }
    (0..k)
        .map(|b| {
            if wsum[b] > 0.0 {
                ((wx[b] / wsum[b], wy[b] / wsum[b]), false)
            } else {
                ((gx[b] / gsum[b], gy[b] / gsum[b]), true)
            }
        })
        .collect()
}

/// Mean over blobs of the centroid displacement relative to the RoI
/// radius.
pub fn dislocation(t_rec: &Field, phantom: &Phantom) -> Result<f64> {
    Ok(report_blobs(t_rec, None, phantom)?
        .iter()
        .map(|b| b.dislocation)
        .sum::<f64>()
        / phantom.blobs.len() as f64)
}

/// Mean over blobs of the relative temperature error between the
/// reconstructed centroid and the true centre, both sampled at the
/// nearest pixel centre.
pub fn centroid_value_error(t_rec: &Field, t_true: &Field, phantom: &Phantom) -> Result<f64> {
    Ok(report_blobs(t_rec, Some(t_true), phantom)?
        .iter()
        .map(|b| b.centroid_value_error)
        .sum::<f64>()
        / phantom.blobs.len() as f64)
}

fn sample_nearest(field: &Field, x: f64, y: f64) -> f64 {
    let grid = field.grid();
    // nearest active pixel centre (the containing cell when active)
    if let Some(j) = grid.active_at_point(x, y) {
        return field.values()[j];
    }
    let mut best = (f64::INFINITY, 0usize);
    for j in 0..grid.n_active() {
        let (cx, cy) = grid.cell_center(j);
        let d = (cx - x).powi(2) + (cy - y).powi(2);
        if d < best.0 {
            best = (d, j);
        }
    }
    field.values()[best.1]
}

fn report_blobs(
    t_rec: &Field,
    t_true: Option<&Field>,
    phantom: &Phantom,
) -> Result<Vec<BlobDetail>> {
    if phantom.blobs.is_empty() {
        return Err(TomoError::Input("phantom has no blobs".into()));
    }
    let grid = t_rec.grid();
    let r_roi = grid.disc().radius;
    let centroids = blob_centroids(t_rec, phantom, grid);
    Ok(phantom
        .blobs
        .iter()
        .zip(centroids)
        .map(|(blob, ((xr, yr), degenerate))| {
            let (xc, yc) = blob.center;
            let dl = ((xr - xc).powi(2) + (yr - yc).powi(2)).sqrt() / r_roi;
            let cve = t_true
                .map(|tt| {
                    let rec = sample_nearest(t_rec, xr, yr);
                    let tru = sample_nearest(tt, xc, yc);
                    (rec - tru).abs() / tru.abs()
                })
                .unwrap_or(0.0);
            BlobDetail {
                true_center: (xc, yc),
                recon_centroid: (xr, yr),
                dislocation: dl,
                centroid_value_error: cve,
                degenerate,
            }
        })
        .collect())
}

/// Sliding 3x3-window outlier fraction. Windows are evaluated wherever
/// all nine cells are active; a pixel counts as an outlier when it
/// deviates from the window statistics by strictly more than three
/// standard deviations. The mean and (population) standard deviation are
/// taken over the *other eight* pixels of the window: including the
/// tested pixel itself would make the rule vacuous, since no sample can
/// deviate from its own 9-sample mean by more than sqrt(8) sigma.
/// Outliers accumulate per (window, pixel) pair as the window slides;
/// the count is returned as a fraction of the active pixels.
pub fn overshoot(t_rec: &Field) -> f64 {
    let grid = t_rec.grid();
    let v = t_rec.values();
    let (nx, ny) = (grid.nx(), grid.ny());
    let mut count = 0usize;
    for cy in 1..ny.saturating_sub(1) {
        'w: for cx in 1..nx.saturating_sub(1) {
            let mut idx = [0usize; 9];
            let mut k = 0;
            for dy in 0..3 {
                for dx in 0..3 {
                    match grid.active_index(cx + dx - 1, cy + dy - 1) {
                        Some(j) => {
                            idx[k] = j;
                            k += 1;
                        }
                        None => continue 'w,
                    }
                }
            }
            for (k, &j) in idx.iter().enumerate() {
                let x = v[j];
                // two-pass mean/variance over the other eight: the
                // textbook sum-of-squares shortcut cancels
                // catastrophically on near-constant windows (values
                // ~300 K, spreads ~1e-3 K) and flags rounding noise
                let mut sum = 0.0;
                for (m, &i) in idx.iter().enumerate() {
                    if m != k {
                        sum += v[i];
                    }
                }
                let mean = sum / 8.0;
                let mut var = 0.0;
                for (m, &i) in idx.iter().enumerate() {
                    if m != k {
                        var += (v[i] - mean) * (v[i] - mean);
                    }
                }
                var /= 8.0;
                if (x - mean).abs() > 3.0 * var.sqrt() {
                    count += 1;
                }
            }
        }
    }
    count as f64 / grid.n_active() as f64
}

/// All four metrics in one pass.
pub fn evaluate(t_rec: &Field, t_true: &Field, phantom: &Phantom) -> Result<MetricReport> {
    t_rec.check_same_grid(t_true)?;
    let blobs = report_blobs(t_rec, Some(t_true), phantom)?;
    let k = blobs.len() as f64;
    Ok(MetricReport {
        ie: image_error(t_rec, t_true)?,
        dl: blobs.iter().map(|b| b.dislocation).sum::<f64>() / k,
        cve: blobs.iter().map(|b| b.centroid_value_error).sum::<f64>() / k,
        os: overshoot(t_rec),
        blobs,
    })
}
