//! Artefact emission: field CSV matrices, portable greymap/pixmap
//! images, SVG plots and the per-run manifest with content hashes.
//! Everything here is byte-deterministic for a given input.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::error::{Result, TomoError};
use crate::field::Field;
use crate::geometry::{enumerate_beams, PixelGrid, SensorGeometry};

fn io_err(path: &Path, e: std::io::Error) -> TomoError {
    TomoError::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
}

// ---------------------------------------------------------------- field CSV

/// Matrix CSV: one row per grid row (top row first), masked cells "NA".
/// Values use the shortest round-trip float formatting, so parsing the
/// text back reproduces the field exactly.
pub fn field_to_csv(field: &Field) -> String {
    let grid = field.grid();
    let mut out = String::new();
    for iy in (0..grid.ny()).rev() {
        for ix in 0..grid.nx() {
            if ix > 0 {
                out.push(',');
            }
            match grid.active_index(ix, iy) {
                Some(j) => {
                    let _ = write!(out, "{}", field.values()[j]);
                }
                None => out.push_str("NA"),
            }
        }
        out.push('\n');
    }
    out
}

/// Parses a matrix written by [`field_to_csv`] back onto `grid`. The
/// mask pattern must agree with the grid.
pub fn field_from_csv(text: &str, grid: &std::sync::Arc<PixelGrid>) -> Result<Field> {
    let rows: Vec<&str> = text.lines().collect();
    if rows.len() != grid.ny() {
        return Err(TomoError::Input(format!(
            "field CSV has {} rows, grid has {}",
            rows.len(),
            grid.ny()
        )));
    }
    let mut values = vec![0.0; grid.n_active()];
    for (r, line) in rows.iter().enumerate() {
        let iy = grid.ny() - 1 - r;
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != grid.nx() {
            return Err(TomoError::Input(format!(
                "field CSV row {r} has {} columns, grid has {}",
                cells.len(),
                grid.nx()
            )));
        }
        for (ix, cell) in cells.iter().enumerate() {
            match (grid.active_index(ix, iy), *cell) {
                (None, "NA") => {}
                (Some(j), v) => {
                    values[j] = v.parse().map_err(|_| {
                        TomoError::Input(format!("field CSV: bad value '{v}' at row {r} col {ix}"))
                    })?;
                }
                (None, v) => {
                    return Err(TomoError::Input(format!(
                        "field CSV: value '{v}' in masked cell at row {r} col {ix}"
                    )))
                }
            }
        }
    }
    Field::new(grid.clone(), values)
}

// ------------------------------------------------------------------ images

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Palette {
    /// P5 greymap: masked 0, active 1 + round(254 * (v - min) / range).
    Grey,
    /// P6 pixmap with a blue-to-red heat ramp; masked cells black.
    Heat,
}

impl Palette {
    pub fn extension(self) -> &'static str {
        match self {
            Palette::Grey => "pgm",
            Palette::Heat => "ppm",
        }
    }
}

fn value_range(field: &Field) -> (f64, f64) {
    let mut min = f64::INFINITY;
    let mut max = f64::NEG_INFINITY;
    for &v in field.values() {
        min = min.min(v);
        max = max.max(v);
    }
    (min, max)
}

fn normalise(v: f64, min: f64, max: f64) -> f64 {
    if max > min {
        (v - min) / (max - min)
    } else {
        1.0
    }
}

fn heat_rgb(u: f64) -> [u8; 3] {
    // piecewise blue -> cyan -> yellow -> red, clamped
    let u = u.clamp(0.0, 1.0);
    let seg = |a: f64, b: f64| ((u - a) / (b - a)).clamp(0.0, 1.0);
    let r = seg(1.0 / 3.0, 2.0 / 3.0);
    let g = (seg(0.0, 1.0 / 3.0) - seg(2.0 / 3.0, 1.0)).clamp(0.0, 1.0);
    let b = 1.0 - seg(1.0 / 3.0, 2.0 / 3.0);
    [
        (r * 255.0).round() as u8,
        (g * 255.0).round() as u8,
        (b * 255.0).round() as u8,
    ]
}

/// Renders the field as image bytes (P5 or P6), top grid row first.
pub fn render_image(field: &Field, palette: Palette) -> Vec<u8> {
    let grid = field.grid();
    let (min, max) = value_range(field);
    let magic = match palette {
        Palette::Grey => "P5",
        Palette::Heat => "P6",
    };
    let mut out = format!("{magic}\n{} {}\n255\n", grid.nx(), grid.ny()).into_bytes();
    for iy in (0..grid.ny()).rev() {
        for ix in 0..grid.nx() {
            match grid.active_index(ix, iy) {
                Some(j) => {
                    let u = normalise(field.values()[j], min, max);
                    match palette {
                        Palette::Grey => out.push(1 + (u * 254.0).round() as u8),
                        Palette::Heat => out.extend_from_slice(&heat_rgb(u)),
                    }
                }
                None => match palette {
                    Palette::Grey => out.push(0),
                    Palette::Heat => out.extend_from_slice(&[0, 0, 0]),
                },
            }
        }
    }
    out
}

/// Writes the image plus a `<path>.range.txt` sidecar with "min max".
pub fn render_field(field: &Field, palette: Palette, path: &Path) -> Result<()> {
    let bytes = render_image(field, palette);
    std::fs::write(path, bytes).map_err(|e| io_err(path, e))?;
    let (min, max) = value_range(field);
    let sidecar = sidecar_path(path);
    std::fs::write(&sidecar, format!("{min} {max}\n")).map_err(|e| io_err(&sidecar, e))
}

pub fn sidecar_path(image_path: &Path) -> PathBuf {
    let mut s = image_path.as_os_str().to_owned();
    s.push(".range.txt");
    PathBuf::from(s)
}

// -------------------------------------------------------------------- SVG

fn svg_header(width: f64, height: f64) -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{height}\" \
         viewBox=\"0 0 {width} {height}\">\n"
    )
}

/// Optical layout: the RoI circle and every beam chord, for checking
/// the sensor arrangement by eye.
pub fn layout_svg(geom: &SensorGeometry) -> Result<String> {
    let beams = enumerate_beams(geom)?;
    let roi = geom.roi();
    let scale = 10.0;
    let pad = 20.0;
    let size = 2.0 * (roi.radius * scale + pad);
    let tx = |x: f64| (x - roi.center.0) * scale + size / 2.0;
    // SVG y grows downward
    let ty = |y: f64| size / 2.0 - (y - roi.center.1) * scale;
    let mut out = svg_header(size, size);
    let _ = writeln!(
        out,
        "<circle cx=\"{}\" cy=\"{}\" r=\"{}\" fill=\"none\" stroke=\"black\"/>",
        size / 2.0,
        size / 2.0,
        roi.radius * scale
    );
    for beam in &beams {
        // chord endpoints: solve |o + t d - c|^2 = r^2 for unit d
        let ox = beam.origin.0 - roi.center.0;
        let oy = beam.origin.1 - roi.center.1;
        let b = ox * beam.dir.0 + oy * beam.dir.1;
        let c = ox * ox + oy * oy - roi.radius * roi.radius;
        let disc = b * b - c;
        if disc <= 0.0 {
            continue;
        }
        let (t0, t1) = (-b - disc.sqrt(), -b + disc.sqrt());
        let p0 = (beam.origin.0 + t0 * beam.dir.0, beam.origin.1 + t0 * beam.dir.1);
        let p1 = (beam.origin.0 + t1 * beam.dir.0, beam.origin.1 + t1 * beam.dir.1);
        let _ = writeln!(
            out,
            "<line x1=\"{:.3}\" y1=\"{:.3}\" x2=\"{:.3}\" y2=\"{:.3}\" stroke=\"steelblue\" stroke-width=\"0.5\"/>",
            tx(p0.0),
            ty(p0.1),
            tx(p1.0),
            ty(p1.1)
        );
    }
    out.push_str("</svg>\n");
    Ok(out)
}

/// A log-x line plot of (x, y) points; axis labels in the margins.
pub fn line_plot_svg(points: &[(f64, f64)], x_label: &str, y_label: &str) -> String {
    let (w, h, ml, mb) = (480.0, 320.0, 50.0, 40.0);
    let mut out = svg_header(w, h);
    if points.is_empty() {
        out.push_str("</svg>\n");
        return out;
    }
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1).collect();
    let (x0, x1) = (
        xs.iter().cloned().fold(f64::INFINITY, f64::min),
        xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
    );
    let (y0, y1) = (
        ys.iter().cloned().fold(f64::INFINITY, f64::min),
        ys.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
    );
    let sx = |x: f64| ml + (x - x0) / (x1 - x0).max(1e-300) * (w - ml - 10.0);
    let sy = |y: f64| (h - mb) - (y - y0) / (y1 - y0).max(1e-300) * (h - mb - 10.0);
    let _ = writeln!(
        out,
        "<line x1=\"{ml}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>",
        h - mb,
        w - 10.0,
        h - mb
    );
    let _ = writeln!(out, "<line x1=\"{ml}\" y1=\"10\" x2=\"{ml}\" y2=\"{}\" stroke=\"black\"/>", h - mb);
    let mut path = String::from("<polyline fill=\"none\" stroke=\"crimson\" points=\"");
    for (x, y) in xs.iter().zip(&ys) {
        let _ = write!(path, "{:.2},{:.2} ", sx(*x), sy(*y));
    }
    out.push_str(path.trim_end());
    out.push_str("\"/>\n");
    let _ = writeln!(
        out,
        "<text x=\"{}\" y=\"{}\" font-size=\"12\">{x_label}</text>",
        w / 2.0,
        h - 8.0
    );
    let _ = writeln!(
        out,
        "<text x=\"12\" y=\"{}\" font-size=\"12\" transform=\"rotate(-90 12 {})\">{y_label}</text>",
        h / 2.0,
        h / 2.0
    );
    let _ = writeln!(
        out,
        "<text x=\"{ml}\" y=\"{}\" font-size=\"10\">[{:.3e}, {:.3e}] x, [{y0:.4}, {y1:.4}] y</text>",
        h - mb + 14.0,
        points[0].0,
        points[points.len() - 1].0
    );
    out.push_str("</svg>\n");
    out
}

/// Linear-x plot with one polyline per named series and a legend.
pub fn multi_line_plot_svg(series: &[(String, Vec<(f64, f64)>)], x_label: &str, y_label: &str) -> String {
    const COLOURS: [&str; 4] = ["crimson", "steelblue", "seagreen", "darkorange"];
    let (w, h, ml, mb) = (480.0, 320.0, 50.0, 40.0);
    let mut out = svg_header(w, h);
    let all: Vec<(f64, f64)> = series.iter().flat_map(|(_, p)| p.iter().copied()).collect();
    if all.is_empty() {
        out.push_str("</svg>\n");
        return out;
    }
    let (x0, x1) = (
        all.iter().map(|p| p.0).fold(f64::INFINITY, f64::min),
        all.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max),
    );
    let (y0, y1) = (
        all.iter().map(|p| p.1).fold(f64::INFINITY, f64::min),
        all.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max),
    );
    let sx = |x: f64| ml + (x - x0) / (x1 - x0).max(1e-300) * (w - ml - 10.0);
    let sy = |y: f64| (h - mb) - (y - y0) / (y1 - y0).max(1e-300) * (h - mb - 10.0);
    let _ = writeln!(
        out,
        "<line x1=\"{ml}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>",
        h - mb,
        w - 10.0,
        h - mb
    );
    let _ = writeln!(out, "<line x1=\"{ml}\" y1=\"10\" x2=\"{ml}\" y2=\"{}\" stroke=\"black\"/>", h - mb);
    for (i, (name, points)) in series.iter().enumerate() {
        let colour = COLOURS[i % COLOURS.len()];
        let mut path = format!("<polyline fill=\"none\" stroke=\"{colour}\" points=\"");
        for (x, y) in points {
            let _ = write!(path, "{:.2},{:.2} ", sx(*x), sy(*y));
        }
        out.push_str(path.trim_end());
        out.push_str("\"/>\n");
        let _ = writeln!(
            out,
            "<text x=\"{}\" y=\"{}\" font-size=\"11\" fill=\"{colour}\">{name}</text>",
            w - 120.0,
            20.0 + i as f64 * 14.0
        );
    }
    let _ = writeln!(
        out,
        "<text x=\"{}\" y=\"{}\" font-size=\"12\">{x_label}</text>",
        w / 2.0,
        h - 8.0
    );
    let _ = writeln!(
        out,
        "<text x=\"12\" y=\"{}\" font-size=\"12\" transform=\"rotate(-90 12 {})\">{y_label}</text>",
        h / 2.0,
        h / 2.0
    );
    let _ = writeln!(
        out,
        "<text x=\"{ml}\" y=\"{}\" font-size=\"10\">x [{x0}, {x1}], y [{y0:.4}, {y1:.4}]</text>",
        h - mb + 14.0
    );
    out.push_str("</svg>\n");
    out
}

/// Heat-map over a (gamma, mu) surface; `values` is row-major over
/// (gammas, mus).
pub fn heatmap_svg(gammas: &[f64], mus: &[f64], values: &[f64]) -> String {
    let cell = 28.0;
    let (ml, mt) = (70.0, 20.0);
    let w = ml + mus.len() as f64 * cell + 20.0;
    let h = mt + gammas.len() as f64 * cell + 60.0;
    let mut out = svg_header(w, h);
    let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    for (gi, _) in gammas.iter().enumerate() {
        for (mi, _) in mus.iter().enumerate() {
            let v = values[gi * mus.len() + mi];
            let [r, g, b] = heat_rgb(normalise(v, min, max));
            let _ = writeln!(
                out,
                "<rect x=\"{:.1}\" y=\"{:.1}\" width=\"{cell}\" height=\"{cell}\" fill=\"rgb({r},{g},{b})\"><title>gamma={:.1e} mu={:.1e} value={v:.5}</title></rect>",
                ml + mi as f64 * cell,
                mt + gi as f64 * cell,
                gammas[gi],
                mus[mi]
            );
        }
    }
    for (gi, g) in gammas.iter().enumerate() {
        let _ = writeln!(
            out,
            "<text x=\"4\" y=\"{:.1}\" font-size=\"9\">{g:.0e}</text>",
            mt + gi as f64 * cell + cell * 0.65
        );
    }
    for (mi, m) in mus.iter().enumerate() {
        let _ = writeln!(
            out,
            "<text x=\"{:.1}\" y=\"{:.1}\" font-size=\"9\">{m:.0e}</text>",
            ml + mi as f64 * cell + 2.0,
            mt + gammas.len() as f64 * cell + 12.0
        );
    }
    let _ = writeln!(
        out,
        "<text x=\"{ml}\" y=\"{:.1}\" font-size=\"10\">rows gamma, cols mu; range [{min:.5}, {max:.5}]</text>",
        h - 10.0
    );
    out.push_str("</svg>\n");
    out
}

// ---------------------------------------------------------------- manifest

/// Collects artefacts under one output directory and finishes with a
/// `manifest.txt` listing "sha256  relative-path" sorted by path.
pub struct ArtifactWriter {
    root: PathBuf,
    entries: BTreeMap<String, String>,
}

impl ArtifactWriter {
    pub fn new(root: impl Into<PathBuf>) -> Result<ArtifactWriter> {
        let root = root.into();
        std::fs::create_dir_all(&root).map_err(|e| io_err(&root, e))?;
        Ok(ArtifactWriter {
            root,
            entries: BTreeMap::new(),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn write(&mut self, relative: &str, bytes: impl AsRef<[u8]>) -> Result<PathBuf> {
        let bytes = bytes.as_ref();
        let path = self.root.join(relative);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent).map_err(|e| io_err(parent, e))?;
        }
        std::fs::write(&path, bytes).map_err(|e| io_err(&path, e))?;
        let digest = Sha256::digest(bytes);
        let mut hex = String::with_capacity(64);
        for b in digest {
            let _ = write!(hex, "{b:02x}");
        }
        self.entries.insert(relative.to_string(), hex);
        Ok(path)
    }

    pub fn write_field_image(&mut self, relative_stem: &str, field: &Field, palette: Palette) -> Result<()> {
        let image = format!("{relative_stem}.{}", palette.extension());
        self.write(&image, render_image(field, palette))?;
        let (min, max) = value_range(field);
        self.write(&format!("{image}.range.txt"), format!("{min} {max}\n"))?;
        Ok(())
    }

    /// Writes the manifest and returns its path.
    pub fn finish(self) -> Result<PathBuf> {
        let mut text = String::new();
        for (path, hash) in &self.entries {
            let _ = writeln!(text, "{hash}  {path}");
        }
        let path = self.root.join("manifest.txt");
        std::fs::write(&path, text).map_err(|e| io_err(&path, e))?;
        Ok(path)
    }
}
