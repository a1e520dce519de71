//! Temperature-dependent line strengths for the two-line thermometry
//! pair, the absorbance ratio `R(T)` and its inverse, and the conversion
//! of paired absorbance-density fields into temperature and molar
//! fraction.

use std::sync::Arc;

use serde::Deserialize;

use crate::error::{Result, TomoError};
use crate::field::Field;

/// Second radiation constant, cm*K.
pub const C2: f64 = 1.4387769;

/// Guard below which the denominator absorbance is treated as zero when
/// forming the two-line ratio.
pub const EPS_DIV: f64 = 1e-12;

/// Lower edge of the relative significance ramp for the two-line
/// ratio: pixels whose line-1 absorbance density falls below this
/// fraction of the image maximum carry no usable ratio information
/// (the ratio of two near-noise residues is noise) and are reported at
/// ambient. Both edges are fractions of the image maximum, so the
/// inversion stays invariant under a common rescaling of both
/// absorbance images.
pub const REL_RAMP_LO: f64 = 0.08;

/// Upper edge of the significance ramp: above this fraction of the
/// image maximum the inverted ratio is reported as is. Between the two
/// edges the above-ambient excess is blended in smoothly, so the
/// reported temperature map has no artificial step at the
/// significance boundary.
pub const REL_RAMP_HI: f64 = 0.30;

/// Fill temperature for pixels whose ratio is undefined; matches the
/// phantom ambient baseline.
pub const AMBIENT_K: f64 = 298.15;

/// One absorption transition.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Transition {
    pub line_centre_cm1: f64,
    pub reference_strength_cm2_atm: f64,
    pub lower_state_energy_cm1: f64,
    pub reference_temperature_k: f64,
}

impl Transition {
    fn validate(&self) -> Result<()> {
        if self.line_centre_cm1 <= 0.0
            || self.reference_strength_cm2_atm <= 0.0
            || self.lower_state_energy_cm1 < 0.0
            || self.reference_temperature_k <= 0.0
        {
            return Err(TomoError::Config(
                "transition constants must be positive (E'' may be zero)".into(),
            ));
        }
        Ok(())
    }
}

/// Polynomial partition function `Q(T)`.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartitionFunction {
    pub coefficients: Vec<f64>,
}

impl PartitionFunction {
    pub fn eval(&self, t: f64) -> f64 {
        self.coefficients.iter().rev().fold(0.0, |acc, c| acc * t + c)
    }
}

/// Line strength `S(T)` in cm^-2 atm^-1.
///
/// Errors for non-positive or non-finite temperatures and for
/// non-positive `Q(T)`; the working-range check lives on
/// [`TransitionPair`].
pub fn line_strength(tr: &Transition, q: &PartitionFunction, t: f64) -> Result<f64> {
    if !t.is_finite() || t <= 0.0 {
        return Err(TomoError::Domain(format!("temperature {t} K is not physical")));
    }
    let qt = q.eval(t);
    if qt <= 0.0 {
        return Err(TomoError::Domain(format!(
            "partition function is non-positive at {t} K"
        )));
    }
    let t0 = tr.reference_temperature_k;
    let q0 = q.eval(t0);
    let boltzmann = (-C2 * tr.lower_state_energy_cm1 * (1.0 / t - 1.0 / t0)).exp();
    let stim = (1.0 - (-C2 * tr.line_centre_cm1 / t).exp())
        / (1.0 - (-C2 * tr.line_centre_cm1 / t0).exp());
    Ok(tr.reference_strength_cm2_atm * (q0 / qt) * boltzmann * stim)
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
struct TemperatureRange {
    min_k: f64,
    max_k: f64,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
struct PairSpecFile {
    line1: Transition,
    line2: Transition,
    partition_function: PartitionFunction,
    temperature_range: TemperatureRange,
}

/// Per-pixel status of a temperature retrieval.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PixelFlag {
    Valid,
    /// Ratio fell outside `[R(T_min), R(T_max)]`; clamped to the endpoint.
    Saturated,
    /// Ratio undefined (non-finite, non-positive, or denominator ~ 0).
    Invalid,
}

/// The two transitions with their shared partition function and the
/// validated working temperature range.
#[derive(Debug, Clone)]
pub struct TransitionPair {
    line1: Transition,
    line2: Transition,
    partition: PartitionFunction,
    t_min: f64,
    t_max: f64,
    increasing: bool,
}

impl TransitionPair {
    pub fn new(
        line1: Transition,
        line2: Transition,
        partition: PartitionFunction,
        t_min: f64,
        t_max: f64,
    ) -> Result<TransitionPair> {
        line1.validate()?;
        line2.validate()?;
        if !(t_min > 0.0 && t_max > t_min) {
            return Err(TomoError::Config("invalid temperature range".into()));
        }
        let mut pair = TransitionPair {
            line1,
            line2,
            partition,
            t_min,
            t_max,
            increasing: true,
        };
        // verify strict monotonicity of R by dense (1 K) sampling
        let steps = ((t_max - t_min).ceil() as usize).max(2);
        let mut prev = pair.ratio(t_min)?;
        let mut dir: Option<bool> = None;
        for k in 1..=steps {
            let t = t_min + (t_max - t_min) * k as f64 / steps as f64;
            let r = pair.ratio(t)?;
            let inc = r > prev;
            if r == prev || dir.map_or(false, |d| d != inc) {
                return Err(TomoError::Config(format!(
                    "two-line ratio is not strictly monotone near {t:.1} K"
                )));
            }
            dir = Some(inc);
            prev = r;
        }
        pair.increasing = dir.unwrap();
        Ok(pair)
    }

    pub fn from_toml_str(text: &str) -> Result<TransitionPair> {
        let spec: PairSpecFile = toml::from_str(text)
            .map_err(|e| TomoError::Config(format!("spectroscopy file: {e}")))?;
        TransitionPair::new(
            spec.line1,
            spec.line2,
            spec.partition_function,
            spec.temperature_range.min_k,
            spec.temperature_range.max_k,
        )
    }

    pub fn from_toml_file(path: &std::path::Path) -> Result<TransitionPair> {
        let text = std::fs::read_to_string(path)?;
        TransitionPair::from_toml_str(&text)
    }

    /// The shipped H2O pair (7185.6 / 7444.36 cm^-1).
    pub fn default_h2o() -> TransitionPair {
        TransitionPair::from_toml_str(include_str!("../data/h2o_7185_7444.toml"))
            .expect("bundled spectroscopy file is valid")
    }

    pub fn t_min(&self) -> f64 {
        self.t_min
    }

    pub fn t_max(&self) -> f64 {
        self.t_max
    }

    pub fn line1(&self) -> &Transition {
        &self.line1
    }

    pub fn line2(&self) -> &Transition {
        &self.line2
    }

    fn check_range(&self, t: f64) -> Result<()> {
        if !(t >= self.t_min && t <= self.t_max) {
            return Err(TomoError::Domain(format!(
                "temperature {t} K outside valid range [{}, {}] K",
                self.t_min, self.t_max
            )));
        }
        Ok(())
    }

    /// `S1(T)` with range check.
    pub fn strength1(&self, t: f64) -> Result<f64> {
        self.check_range(t)?;
        line_strength(&self.line1, &self.partition, t)
    }

    /// `S2(T)` with range check.
    pub fn strength2(&self, t: f64) -> Result<f64> {
        self.check_range(t)?;
        line_strength(&self.line2, &self.partition, t)
    }

    /// Two-line ratio `R(T) = S2(T)/S1(T)`.
    pub fn ratio(&self, t: f64) -> Result<f64> {
        Ok(self.strength2(t)? / self.strength1(t)?)
    }

    /// Inverts `R(T) = r` by bisection to a bracket width below 0.01 K.
    ///
    /// Out-of-range ratios clamp to the corresponding endpoint and are
    /// flagged [`PixelFlag::Saturated`]; non-finite or non-positive
    /// ratios yield [`PixelFlag::Invalid`] with the ambient fill value.
    pub fn invert_ratio(&self, r: f64) -> (f64, PixelFlag) {
        if !r.is_finite() || r <= 0.0 {
            return (AMBIENT_K, PixelFlag::Invalid);
        }
        // endpoints are exact by construction
        let r_lo = self.ratio(self.t_min).expect("endpoint in range");
        let r_hi = self.ratio(self.t_max).expect("endpoint in range");
        let (r_min, r_max, t_at_min, t_at_max) = if self.increasing {
            (r_lo, r_hi, self.t_min, self.t_max)
        } else {
            (r_hi, r_lo, self.t_max, self.t_min)
        };
        if r < r_min {
            return (t_at_min, PixelFlag::Saturated);
        }
        if r > r_max {
            return (t_at_max, PixelFlag::Saturated);
        }
        if r == r_min {
            return (t_at_min, PixelFlag::Valid);
        }
        if r == r_max {
            return (t_at_max, PixelFlag::Valid);
        }
        let (mut lo, mut hi) = (self.t_min, self.t_max);
        while hi - lo >= 0.01 {
            let mid = 0.5 * (lo + hi);
            let rm = self.ratio(mid).expect("bisection stays in range");
            if (rm < r) == self.increasing {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        (0.5 * (lo + hi), PixelFlag::Valid)
    }
}

/// Per-pixel two-line temperature retrieval (ratio of the two absorbance
/// densities, inverted through `R`). Pixels whose denominator is at or
/// below [`EPS_DIV`], or below [`REL_RAMP_LO`] times the image maximum,
/// are flagged invalid and filled with [`AMBIENT_K`]; between
/// [`REL_RAMP_LO`] and [`REL_RAMP_HI`] the above-ambient excess is
/// faded in smoothly.
pub fn fields_to_temperature(
    a1: &Field,
    a2: &Field,
    pair: &TransitionPair,
) -> Result<(Field, Vec<PixelFlag>)> {
    fields_to_temperature_with_ramp(a1, a2, pair, REL_RAMP_LO, REL_RAMP_HI)
}

/// [`fields_to_temperature`] with explicit ramp edges (`lo = hi = 0`
/// disables the significance ramp, leaving only the [`EPS_DIV`]
/// division guard).
pub fn fields_to_temperature_with_ramp(
    a1: &Field,
    a2: &Field,
    pair: &TransitionPair,
    ramp_lo: f64,
    ramp_hi: f64,
) -> Result<(Field, Vec<PixelFlag>)> {
    a1.check_same_grid(a2)?;
    if !(0.0..1.0).contains(&ramp_lo) || !(0.0..1.0).contains(&ramp_hi) || ramp_lo > ramp_hi {
        return Err(TomoError::Domain(format!(
            "significance ramp [{ramp_lo}, {ramp_hi}] is not an ordered pair in [0, 1)"
        )));
    }
    let max1 = a1.values().iter().copied().fold(0.0, f64::max);
    let lo = EPS_DIV.max(ramp_lo * max1);
    let hi = ramp_hi * max1;
    let mut temps = Vec::with_capacity(a1.len());
    let mut flags = Vec::with_capacity(a1.len());
    for (&d1, &d2) in a1.values().iter().zip(a2.values()) {
        if !(d1 > lo) {
            temps.push(AMBIENT_K);
            flags.push(PixelFlag::Invalid);
            continue;
        }
        let (t, flag) = pair.invert_ratio(d2 / d1);
        // smoothstep fade of the above-ambient excess across the ramp
        let w = if d1 >= hi {
            1.0
        } else {
            let u = (d1 - lo) / (hi - lo);
            u * u * (3.0 - 2.0 * u)
        };
        temps.push(AMBIENT_K + w * (t - AMBIENT_K));
        flags.push(flag);
    }
    Ok((Field::new(Arc::clone(a1.grid()), temps)?, flags))
}

/// Molar fraction from the line-1 absorbance density and the retrieved
/// temperature: `X = a1 / (P * S1(T))`. Invalid pixels yield zero.
pub fn fields_to_concentration(
    a1: &Field,
    temperature: &Field,
    flags: &[PixelFlag],
    pressure_atm: f64,
    pair: &TransitionPair,
) -> Result<Field> {
    a1.check_same_grid(temperature)?;
    if flags.len() != a1.len() {
        return Err(TomoError::Shape("flag vector length mismatch".into()));
    }
    if pressure_atm <= 0.0 {
        return Err(TomoError::Domain("pressure must be positive".into()));
    }
    let mut xs = Vec::with_capacity(a1.len());
    for ((&d1, &t), &flag) in a1
        .values()
        .iter()
        .zip(temperature.values())
        .zip(flags)
    {
        if flag == PixelFlag::Invalid {
            xs.push(0.0);
        } else {
            let s1 = pair.strength1(t.clamp(pair.t_min(), pair.t_max()))?;
            xs.push(d1 / (pressure_atm * s1));
        }
    }
    Field::new(Arc::clone(a1.grid()), xs)
}
