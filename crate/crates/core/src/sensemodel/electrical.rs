use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::SenseError;
use crate::geometry::VoxelGrid;
use crate::router::ChannelPath;

/// Series-resistor model of a channel: one resistor per path step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelElectrical {
    /// Ω·mm.
    pub resistivity: f64,
    pub step_lengths_mm: Vec<f64>,
    pub area_mm2: f64,
    pub baseline_ohm: f64,
}

impl ChannelElectrical {
    pub fn new(step_lengths_mm: Vec<f64>, radius_mm: f64, resistivity: f64) -> Result<Self, SenseError> {
        check_radius(radius_mm)?;
        if !(resistivity > 0.0 && resistivity.is_finite()) {
            return Err(SenseError::InvalidResistivity(resistivity));
        }
        let length: f64 = step_lengths_mm.iter().sum();
        if !(length > 0.0) {
            return Err(SenseError::ZeroLength);
        }
        let area_mm2 = PI * radius_mm * radius_mm;
        Ok(Self {
            resistivity,
            baseline_ohm: resistivity * length / area_mm2,
            step_lengths_mm,
            area_mm2,
        })
    }

    pub fn from_path(
        path: &ChannelPath,
        grid: &VoxelGrid,
        radius_mm: f64,
        resistivity: f64,
    ) -> Result<Self, SenseError> {
        Self::new(path.step_lengths(grid), radius_mm, resistivity)
    }

    /// Resistivity chosen so the undeformed channel reads `target_ohm`.
    pub fn calibrated(step_lengths_mm: Vec<f64>, radius_mm: f64, target_ohm: f64) -> Result<Self, SenseError> {
        let length: f64 = step_lengths_mm.iter().sum();
        let rho = resistivity_for(length, radius_mm, target_ohm)?;
        let mut e = Self::new(step_lengths_mm, radius_mm, rho)?;
        e.baseline_ohm = target_ohm;
        Ok(e)
    }

    pub fn length_mm(&self) -> f64 {
        self.step_lengths_mm.iter().sum()
    }

    pub fn steps(&self) -> usize {
        self.step_lengths_mm.len()
    }
}

fn check_radius(radius_mm: f64) -> Result<(), SenseError> {
    if radius_mm > 0.0 && radius_mm.is_finite() {
        Ok(())
    } else {
        Err(SenseError::InvalidRadius(radius_mm))
    }
}

fn resistivity_for(length_mm: f64, radius_mm: f64, target_ohm: f64) -> Result<f64, SenseError> {
    check_radius(radius_mm)?;
    if !(target_ohm > 0.0 && target_ohm.is_finite()) {
        return Err(SenseError::InvalidTarget(target_ohm));
    }
    if !(length_mm > 0.0) {
        return Err(SenseError::ZeroLength);
    }
    Ok(target_ohm * PI * radius_mm * radius_mm / length_mm)
}

/// `ρ L / (π r²)` with `L` the centre-line length of `path`.
pub fn baseline_resistance(path: &ChannelPath, radius_mm: f64, resistivity: f64) -> Result<f64, SenseError> {
    check_radius(radius_mm)?;
    if !(resistivity > 0.0) {
        return Err(SenseError::InvalidResistivity(resistivity));
    }
    if !(path.length_mm > 0.0) {
        return Err(SenseError::ZeroLength);
    }
    Ok(resistivity * path.length_mm / (PI * radius_mm * radius_mm))
}

/// Inverse of [`baseline_resistance`] for a target baseline.
pub fn calibrate_resistivity(path: &ChannelPath, radius_mm: f64, target_ohm: f64) -> Result<f64, SenseError> {
    resistivity_for(path.length_mm, radius_mm, target_ohm)
}

/// Per-step cross-section scale factors; 1 is undeformed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeformationProfile {
    pub scales: Vec<f64>,
}

impl DeformationProfile {
    pub fn undeformed(steps: usize) -> Self {
        Self {
            scales: vec![1.0; steps],
        }
    }

    pub fn validate(&self) -> Result<(), SenseError> {
        match self.scales.iter().position(|&s| !(s > 0.0 && s <= 1.0)) {
            Some(index) => Err(SenseError::InvalidScale {
                index,
                value: self.scales[index],
            }),
            None => Ok(()),
        }
    }
}

/// Resistance of the deformed channel, `ρ Σ lᵢ / (A sᵢ)`, and its rise over
/// the baseline.
pub fn deformed_resistance(elec: &ChannelElectrical, deform: &DeformationProfile) -> Result<(f64, f64), SenseError> {
    if deform.scales.len() != elec.steps() {
        return Err(SenseError::LengthMismatch {
            expected: elec.steps(),
            got: deform.scales.len(),
        });
    }
    deform.validate()?;
    let sum: f64 = elec
        .step_lengths_mm
        .iter()
        .zip(&deform.scales)
        .map(|(l, s)| l / s)
        .sum();
    let r = elec.resistivity * sum / elec.area_mm2;
    Ok((r, (r - elec.baseline_ohm).max(0.0)))
}
