//! Ground-truth phantoms, the fine-grid forward projection and
//! measurement-noise injection.

use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Result, TomoError};
use crate::field::Field;
use crate::geometry::{build_sensitivity, enumerate_beams, PixelGrid, SensorGeometry};
use crate::spectroscopy::TransitionPair;

fn default_temperature_amplitude() -> f64 {
    800.0
}

fn default_concentration_amplitude() -> f64 {
    0.1
}

/// One Gaussian inhomogeneity. Note the exponent divides by `sigma^2`,
/// not `2 sigma^2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaussianBlob {
    pub center: (f64, f64),
    pub sigma: f64,
    #[serde(default = "default_temperature_amplitude")]
    pub temperature_amplitude_k: f64,
    #[serde(default = "default_concentration_amplitude")]
    pub concentration_amplitude: f64,
}

impl GaussianBlob {
    fn shape(&self, x: f64, y: f64) -> f64 {
        let dx = x - self.center.0;
        let dy = y - self.center.1;
        (-(dx * dx + dy * dy) / (self.sigma * self.sigma)).exp()
    }
}

fn default_ambient() -> f64 {
    298.15
}

fn default_pressure() -> f64 {
    1.0
}

/// Ground-truth temperature/concentration distribution: an ambient
/// baseline plus Gaussian inhomogeneities, at uniform pressure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Phantom {
    pub blobs: Vec<GaussianBlob>,
    #[serde(default = "default_ambient")]
    pub ambient_temperature_k: f64,
    #[serde(default = "default_pressure")]
    pub pressure_atm: f64,
}

impl Phantom {
    /// The three named presets (one, two and three inhomogeneities).
    pub fn preset(name: &str) -> Result<Phantom> {
        let blob = |x: f64, y: f64, sigma: f64| GaussianBlob {
            center: (x, y),
            sigma,
            temperature_amplitude_k: default_temperature_amplitude(),
            concentration_amplitude: default_concentration_amplitude(),
        };
        let blobs = match name {
            "phantom1" => vec![blob(0.0, 0.0, 0.9)],
            "phantom2" => vec![blob(-3.82, -3.82, 0.45), blob(3.82, 3.82, 0.45)],
            "phantom3" => vec![
                blob(-2.7, 4.68, 0.45),
                blob(-2.7, -4.68, 0.45),
                blob(5.4, 0.0, 0.45),
            ],
            other => {
                return Err(TomoError::Config(format!("unknown phantom preset '{other}'")))
            }
        };
        Ok(Phantom {
            blobs,
            ambient_temperature_k: default_ambient(),
            pressure_atm: default_pressure(),
        })
    }

    pub fn validate(&self, grid: &PixelGrid) -> Result<()> {
        if self.blobs.is_empty() {
            return Err(TomoError::Config("phantom needs at least one blob".into()));
        }
        let disc = grid.disc();
        for (k, b) in self.blobs.iter().enumerate() {
            if b.sigma <= 0.0 {
                return Err(TomoError::Config(format!("blob {k}: sigma must be positive")));
            }
            let d = ((b.center.0 - disc.center.0).powi(2)
                + (b.center.1 - disc.center.1).powi(2))
            .sqrt();
            if d >= disc.radius {
                return Err(TomoError::Config(format!(
                    "blob {k} centre lies outside the RoI"
                )));
            }
        }
        Ok(())
    }

    /// Pixel-centre evaluation of the temperature and molar-fraction
    /// distributions.
    pub fn sample_field(&self, grid: &Arc<PixelGrid>) -> (Field, Field) {
        let t = Field::from_fn(Arc::clone(grid), |x, y| {
            self.ambient_temperature_k
                + self
                    .blobs
                    .iter()
                    .map(|b| b.temperature_amplitude_k * b.shape(x, y))
                    .sum::<f64>()
        });
        let x = Field::from_fn(Arc::clone(grid), |x, y| {
            self.blobs
                .iter()
                .map(|b| b.concentration_amplitude * b.shape(x, y))
                .sum::<f64>()
        });
        (t, x)
    }
}

/// How measurement noise scales with the signal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseModel {
    /// Per-measurement sigma: `sigma_i = |A_i| * 10^(-snr/20)`.
    PerMeasurement,
    /// One sigma for all beams of a transition, from the RMS signal.
    GlobalRms,
}

impl Default for NoiseModel {
    fn default() -> Self {
        NoiseModel::PerMeasurement
    }
}

/// Per-beam layout metadata carried alongside the path integrals.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BeamMeta {
    pub angle_deg: f64,
    pub offset_cm: f64,
}

/// Per-beam path integrals for both transitions.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementSet {
    pub a1: Vec<f64>,
    pub a2: Vec<f64>,
    pub beams: Vec<BeamMeta>,
    /// `f64::INFINITY` marks noiseless data.
    pub snr_db: f64,
    pub rng_seed: u64,
}

impl MeasurementSet {
    pub fn len(&self) -> usize {
        self.a1.len()
    }

    pub fn is_empty(&self) -> bool {
        self.a1.is_empty()
    }

    /// CSV with one row per beam: `beam_index,angle_deg,offset_cm,A1,A2`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("beam_index,angle_deg,offset_cm,A1,A2\n");
        for i in 0..self.len() {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                i, self.beams[i].angle_deg, self.beams[i].offset_cm, self.a1[i], self.a2[i]
            ));
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<MeasurementSet> {
        let mut a1 = Vec::new();
        let mut a2 = Vec::new();
        let mut beams = Vec::new();
        for (ln, line) in text.lines().enumerate().skip(1) {
            if line.trim().is_empty() {
                continue;
            }
            let cols: Vec<&str> = line.split(',').collect();
            if cols.len() != 5 {
                return Err(TomoError::Input(format!(
                    "measurement CSV line {}: expected 5 columns",
                    ln + 1
                )));
            }
            let parse = |s: &str| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|e| TomoError::Input(format!("measurement CSV line {}: {e}", ln + 1)))
            };
            beams.push(BeamMeta {
                angle_deg: parse(cols[1])?,
                offset_cm: parse(cols[2])?,
            });
            a1.push(parse(cols[3])?);
            a2.push(parse(cols[4])?);
        }
        Ok(MeasurementSet {
            a1,
            a2,
            beams,
            snr_db: f64::INFINITY,
            rng_seed: 0,
        })
    }
}

/// Noiseless path integrals for both transitions, computed on a fine
/// discretisation of the forward problem: `A = L_fine a_fine` with
/// `a = P X S(T)` evaluated at fine pixel centres. Deterministic.
pub fn forward_project(
    phantom: &Phantom,
    pair: &TransitionPair,
    geom: &SensorGeometry,
    fine_pixel_size: f64,
) -> Result<MeasurementSet> {
    let grid = Arc::new(PixelGrid::new(geom.roi(), fine_pixel_size)?);
    phantom.validate(&grid)?;
    let beams = enumerate_beams(geom)?;
    let matrix = build_sensitivity(&beams, &grid)?;
    let (t, x) = phantom.sample_field(&grid);
    let n = grid.n_active();
    let mut dens1 = vec![0.0; n];
    let mut dens2 = vec![0.0; n];
    for j in 0..n {
        let tj = t.values()[j];
        let xj = x.values()[j];
        dens1[j] = phantom.pressure_atm * xj * pair.strength1(tj)?;
        dens2[j] = phantom.pressure_atm * xj * pair.strength2(tj)?;
    }
    let mut a1 = vec![0.0; beams.len()];
    let mut a2 = vec![0.0; beams.len()];
    matrix.mul(&dens1, &mut a1);
    matrix.mul(&dens2, &mut a2);
    Ok(MeasurementSet {
        a1,
        a2,
        beams: beams
            .iter()
            .map(|b| BeamMeta {
                angle_deg: b.angle_deg,
                offset_cm: b.offset_cm,
            })
            .collect(),
        snr_db: f64::INFINITY,
        rng_seed: 0,
    })
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// One standard-normal draw from a counter-based stream: the value for a
/// given `(seed, stream, index)` never depends on evaluation order.
fn element_normal(seed: u64, stream: u64, index: usize) -> f64 {
    let s = splitmix64(splitmix64(seed ^ stream.wrapping_mul(0xA5A5_A5A5_5A5A_5A5A)) ^ index as u64);
    let mut rng = ChaCha8Rng::seed_from_u64(s);
    StandardNormal.sample(&mut rng)
}

/// Adds zero-mean Gaussian noise at the requested SNR. Negative results
/// are kept as-is; an infinite SNR returns the input unchanged (apart
/// from the noise metadata). Bit-reproducible from the seed.
pub fn add_noise(
    ms: &MeasurementSet,
    snr_db: f64,
    seed: u64,
    model: NoiseModel,
) -> MeasurementSet {
    let mut out = ms.clone();
    out.snr_db = snr_db;
    out.rng_seed = seed;
    if snr_db.is_infinite() {
        return out;
    }
    let factor = 10f64.powf(-snr_db / 20.0);
    let rms = |v: &[f64]| {
        if v.is_empty() {
            0.0
        } else {
            (v.iter().map(|x| x * x).sum::<f64>() / v.len() as f64).sqrt()
        }
    };
    for (stream, values) in [(1u64, &mut out.a1), (2u64, &mut out.a2)] {
        let global_sigma = match model {
            NoiseModel::GlobalRms => rms(values) * factor,
            NoiseModel::PerMeasurement => 0.0,
        };
        for (i, v) in values.iter_mut().enumerate() {
            let sigma = match model {
                NoiseModel::PerMeasurement => v.abs() * factor,
                NoiseModel::GlobalRms => global_sigma,
            };
            *v += sigma * element_normal(seed, stream, i);
        }
    }
    out
}
