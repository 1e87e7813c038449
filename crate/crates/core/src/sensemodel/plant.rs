use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{deformed_resistance, measure, ChannelElectrical, DeformationProfile, MeasurementChain, SenseError};

/// Share of the channel length squeezed by the compression plates.
pub const DEFAULT_COMPRESSED_FRACTION: f64 = 0.3;

/// Force to normalised-response calibration, one piecewise-linear curve per
/// drive current. Fractions are ΔR/R0 at the measured output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompressionPlant {
    #[serde(rename = "currents_A")]
    pub currents_a: Vec<f64>,
    #[serde(rename = "force_N_to_fraction")]
    pub curves: Vec<Vec<[f64; 2]>>,
    #[serde(default = "default_fraction")]
    pub compressed_fraction: f64,
}

fn default_fraction() -> f64 {
    DEFAULT_COMPRESSED_FRACTION
}

impl CompressionPlant {
    /// Calibration fixture fitted to the published compression curves: about
    /// 29% of full range at 8 N for 0.2 A and 0.3 A, about 38% for 0.5 A, with
    /// the steepest rise between 2 and 4 N.
    pub fn demo() -> Self {
        let forces = [0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0];
        let low = [0.0, 0.015, 0.045, 0.12, 0.195, 0.235, 0.262, 0.279, 0.29];
        let high = [0.0, 0.02, 0.06, 0.16, 0.26, 0.31, 0.345, 0.365, 0.38];
        let curve = |f: &[f64; 9]| forces.iter().zip(f).map(|(&x, &y)| [x, y]).collect::<Vec<_>>();
        Self {
            currents_a: vec![0.2, 0.3, 0.5],
            curves: vec![curve(&low), curve(&low), curve(&high)],
            compressed_fraction: DEFAULT_COMPRESSED_FRACTION,
        }
    }

    pub fn validate(&self) -> Result<(), SenseError> {
        let bad = |m: &str| Err(SenseError::InvalidPlant(m.to_string()));
        if self.currents_a.is_empty() || self.currents_a.len() != self.curves.len() {
            return bad("need one curve per current");
        }
        if !(self.compressed_fraction > 0.0 && self.compressed_fraction <= 1.0) {
            return bad("compressed fraction must lie in (0, 1]");
        }
        for c in &self.curves {
            if c.len() < 2 {
                return bad("curves need at least two control points");
            }
            if c.windows(2).any(|w| w[1][0] <= w[0][0] || w[1][1] < w[0][1]) {
                return bad("curves must have increasing force and non-decreasing fraction");
            }
            if c[0][1] < 0.0 {
                return bad("fractions must be non-negative");
            }
        }
        Ok(())
    }

    fn curve(&self, current_a: f64) -> Result<&[[f64; 2]], SenseError> {
        self.currents_a
            .iter()
            .position(|&c| (c - current_a).abs() <= 1e-9)
            .map(|i| self.curves[i].as_slice())
            .ok_or(SenseError::UnknownCurrent(current_a))
    }

    /// Calibrated response fraction at `force_n`.
    pub fn fraction(&self, current_a: f64, force_n: f64) -> Result<f64, SenseError> {
        let c = self.curve(current_a)?;
        let (min, max) = (c[0][0], c[c.len() - 1][0]);
        if !(force_n >= min && force_n <= max) {
            return Err(SenseError::ForceOutOfRange {
                force: force_n,
                min,
                max,
            });
        }
        Ok(interpolate(c, force_n))
    }

    /// Area scales that produce the calibrated fraction: a contiguous span of
    /// steps in the middle of the channel is narrowed uniformly.
    pub fn profile(
        &self,
        elec: &ChannelElectrical,
        current_a: f64,
        force_n: f64,
    ) -> Result<DeformationProfile, SenseError> {
        let f = self.fraction(current_a, force_n)?;
        Ok(squeeze_profile(elec, f, self.compressed_fraction))
    }
}

/// Area scales that raise resistance by `fraction` of the baseline: steps
/// whose midpoints fall in the central `compressed_fraction` of the channel
/// length are narrowed uniformly.
pub fn squeeze_profile(elec: &ChannelElectrical, fraction: f64, compressed_fraction: f64) -> DeformationProfile {
    let total = elec.length_mm();
    let (lo, hi) = (
        0.5 * (1.0 - compressed_fraction) * total,
        0.5 * (1.0 + compressed_fraction) * total,
    );
    let mut at = 0.0;
    let mut squeezed = vec![false; elec.steps()];
    for (i, &l) in elec.step_lengths_mm.iter().enumerate() {
        let mid = at + 0.5 * l;
        squeezed[i] = mid >= lo && mid <= hi;
        at += l;
    }
    if !squeezed.iter().any(|&s| s) {
        // Very short channels: squeeze the middle step.
        squeezed[elec.steps() / 2] = true;
    }
    let share: f64 = elec
        .step_lengths_mm
        .iter()
        .zip(&squeezed)
        .filter(|x| *x.1)
        .map(|x| x.0)
        .sum::<f64>()
        / total;
    let s = 1.0 / (1.0 + fraction.max(0.0) / share);
    DeformationProfile {
        scales: squeezed.iter().map(|&q| if q { s } else { 1.0 }).collect(),
    }
}

pub(crate) fn interpolate(c: &[[f64; 2]], x: f64) -> f64 {
    let i = c.partition_point(|p| p[0] <= x).clamp(1, c.len() - 1);
    let ([x0, y0], [x1, y1]) = (c[i - 1], c[i]);
    y0 + (y1 - y0) * (x - x0) / (x1 - x0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensitivityRow {
    pub force_n: f64,
    pub fraction: f64,
    pub gradient_per_n: f64,
}

/// Normalised response read through `chain` at each force, with its finite
/// difference gradient (central inside, one-sided at the ends).
pub fn sensitivity_table(
    plant: &CompressionPlant,
    elec: &ChannelElectrical,
    forces: &[f64],
    chain: &MeasurementChain,
) -> Result<Vec<SensitivityRow>, SenseError> {
    plant.validate()?;
    chain.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let r0 = measure(chain, elec.baseline_ohm, &mut rng).resistance_est;
    let mut fractions = Vec::with_capacity(forces.len());
    for &f in forces {
        let profile = plant.profile(elec, chain.current_a, f)?;
        let (r, _) = deformed_resistance(elec, &profile)?;
        let est = measure(chain, r, &mut rng).resistance_est;
        fractions.push((est - r0) / r0);
    }
    let n = forces.len();
    Ok((0..n)
        .map(|i| {
            let (a, b) = (i.saturating_sub(1), (i + 1).min(n - 1));
            let gradient_per_n = if a == b {
                0.0
            } else {
                (fractions[b] - fractions[a]) / (forces[b] - forces[a])
            };
            SensitivityRow {
                force_n: forces[i],
                fraction: fractions[i],
                gradient_per_n,
            }
        })
        .collect())
}

pub fn write_sensitivity_csv<W: std::io::Write>(rows: &[SensitivityRow], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}
