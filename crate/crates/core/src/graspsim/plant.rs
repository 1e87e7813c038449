use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::GraspError;
use crate::sensemodel::{deformed_resistance, measure, squeeze_profile, ChannelElectrical, MeasurementChain};
use crate::sigproc::ResistanceTrace;

/// Closure at which the demo plant reproduces the soft full grasp.
pub const DEMO_SOFT_CLOSURE_MM: f64 = 50.0;
/// Closure at which the demo plant reproduces the hard full grasp.
pub const DEMO_HARD_CLOSURE_MM: f64 = 70.0;

/// Reading noise that reproduces the published pick statistics: with it,
/// 15-pick batches put both whiskers of the per-pick maximum inside
/// 0.105–0.143 Ω with the median under the 0.125 Ω target for about nine
/// seeds in ten.
pub const DEMO_NOISE_OHM: f64 = 0.005;

/// Gripper closure to channel deformation. Both curves are piecewise linear
/// in closure past contact onset and flat beyond their last point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraspPlant {
    /// Closure at first contact.
    pub contact_onset_mm: f64,
    /// Each episode shifts the onset uniformly by up to this much either way.
    pub onset_jitter_mm: f64,
    /// `[mm past onset, ΔR/R0]`, starting at `[0, 0]` and non-decreasing.
    pub deformation: Vec<[f64; 2]>,
    /// `[mm past onset, N]` for the fingertip load cell.
    pub fingertip_force: Vec<[f64; 2]>,
    pub force_noise_n: f64,
    /// Chance that an episode's contact misses the fingertip load cell.
    pub force_dropout: f64,
    pub compressed_fraction: f64,
    pub electrical: ChannelElectrical,
    pub chain: MeasurementChain,
}

impl GraspPlant {
    /// Fixture calibrated to the published grasp results on a 0.5 Ω channel:
    /// ΔR of 0.39 Ω at the soft grasp and 0.99 Ω at the hard grasp, fingertip
    /// forces of 0.19 N and 11.1 N at the same closures, and about 0.018 Ω
    /// per mm around the 0.125 Ω pick target. Readings are noise free; see
    /// [`GraspPlant::with_noise_ohm`].
    pub fn demo() -> Self {
        let r0 = 0.5;
        let delta = [
            (0.0, 0.0),
            (2.0, 0.02),
            (8.0, 0.13),
            (12.0, 0.39),
            (22.0, 0.72),
            (32.0, 0.99),
            (42.0, 1.1),
        ];
        Self {
            contact_onset_mm: 38.0,
            onset_jitter_mm: 1.0,
            deformation: delta.iter().map(|&(x, d)| [x, d / r0]).collect(),
            fingertip_force: vec![[0.0, 0.0], [12.0, 0.19], [22.0, 3.4], [32.0, 11.1], [42.0, 16.0]],
            force_noise_n: 0.05,
            force_dropout: 0.6,
            compressed_fraction: crate::sensemodel::DEFAULT_COMPRESSED_FRACTION,
            electrical: ChannelElectrical::calibrated(vec![1.0; 200], 1.0, r0).expect("valid fixture"),
            chain: MeasurementChain::default(),
        }
    }

    /// Sets the chain's output noise so readings carry `sigma_ohm` of noise.
    pub fn with_noise_ohm(mut self, sigma_ohm: f64) -> Self {
        self.chain.noise_rms_v = sigma_ohm * self.chain.current_a * self.chain.gain;
        self
    }

    pub fn baseline_ohm(&self) -> f64 {
        self.electrical.baseline_ohm
    }

    pub fn validate(&self) -> Result<(), GraspError> {
        let bad = |m: &str| Err(GraspError::InvalidPlant(m.to_string()));
        for (name, c) in [
            ("deformation", &self.deformation),
            ("fingertip force", &self.fingertip_force),
        ] {
            if c.len() < 2 || c[0] != [0.0, 0.0] {
                return bad(&format!("{name} curve must start at [0, 0] and have two points"));
            }
            if c.windows(2).any(|w| !(w[1][0] > w[0][0]) || !(w[1][1] >= w[0][1])) {
                return bad(&format!(
                    "{name} curve must be increasing in closure and non-decreasing"
                ));
            }
        }
        if !(self.contact_onset_mm >= 0.0
            && self.onset_jitter_mm >= 0.0
            && self.onset_jitter_mm <= self.contact_onset_mm)
        {
            return bad("contact onset and jitter must be non-negative with jitter at most the onset");
        }
        if !(self.force_noise_n >= 0.0 && (0.0..=1.0).contains(&self.force_dropout)) {
            return bad("force noise must be non-negative and dropout a probability");
        }
        if !(self.compressed_fraction > 0.0 && self.compressed_fraction <= 1.0) {
            return bad("compressed fraction must lie in (0, 1]");
        }
        self.chain.validate()?;
        Ok(())
    }

    /// Normalised deformation ΔR/R0 at `closure_mm` for a given onset.
    pub fn deformation_at(&self, closure_mm: f64, onset_mm: f64) -> f64 {
        curve_at(&self.deformation, closure_mm - onset_mm)
    }

    pub fn force_at(&self, closure_mm: f64, onset_mm: f64) -> f64 {
        curve_at(&self.fingertip_force, closure_mm - onset_mm)
    }

    /// True channel resistance at `closure_mm`, computed through the
    /// deformed electrical model.
    pub fn resistance_at(&self, closure_mm: f64, onset_mm: f64) -> Result<f64, GraspError> {
        let d = self.deformation_at(closure_mm, onset_mm);
        if d == 0.0 {
            return Ok(self.electrical.baseline_ohm);
        }
        let profile = squeeze_profile(&self.electrical, d, self.compressed_fraction);
        Ok(deformed_resistance(&self.electrical, &profile)?.0)
    }

    pub(crate) fn draw_onset<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        if self.onset_jitter_mm > 0.0 {
            self.contact_onset_mm + rng.random_range(-self.onset_jitter_mm..=self.onset_jitter_mm)
        } else {
            self.contact_onset_mm
        }
    }

    pub(crate) fn draw_contact<R: Rng + ?Sized>(&self, rng: &mut R) -> bool {
        !rng.random_bool(self.force_dropout)
    }

    /// Fingertip reading: plant force if the contact lands on the load cell,
    /// plus noise, clamped at zero.
    pub(crate) fn read_force<R: Rng + ?Sized>(
        &self,
        closure_mm: f64,
        onset_mm: f64,
        contact: bool,
        rng: &mut R,
    ) -> f64 {
        let f = if contact {
            self.force_at(closure_mm, onset_mm)
        } else {
            0.0
        };
        let noise = if self.force_noise_n > 0.0 {
            Normal::new(0.0, self.force_noise_n).expect("validated").sample(rng)
        } else {
            0.0
        };
        (f + noise).max(0.0)
    }
}

fn curve_at(c: &[[f64; 2]], x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= c[c.len() - 1][0] {
        return c[c.len() - 1][1];
    }
    crate::sensemodel::interpolate(c, x)
}

/// Repeated open/close grasps at a fixed closure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CycleProtocol {
    pub closure_mm: f64,
    pub cycles: usize,
    pub open_s: f64,
    pub close_s: f64,
    /// Gripper travel time, included at the start of the closed phase.
    pub travel_s: f64,
    pub sample_rate_hz: f64,
}

impl Default for CycleProtocol {
    fn default() -> Self {
        Self {
            closure_mm: DEMO_HARD_CLOSURE_MM,
            cycles: 50,
            open_s: 3.0,
            close_s: 3.0,
            travel_s: 0.2,
            sample_rate_hz: 1000.0,
        }
    }
}

/// Simulated ΔR trace (baseline subtracted) with a fingertip force channel
/// for a cyclic grasp protocol. Contact onset and load-cell contact are
/// drawn once per cycle.
pub fn grasp_cycle_trace<R: Rng + ?Sized>(
    plant: &GraspPlant,
    protocol: &CycleProtocol,
    rng: &mut R,
) -> Result<ResistanceTrace, GraspError> {
    plant.validate()?;
    let fs = protocol.sample_rate_hz;
    if !(fs > 0.0
        && protocol.open_s >= 0.0
        && protocol.close_s > 0.0
        && protocol.travel_s >= 0.0
        && protocol.closure_mm >= 0.0)
    {
        return Err(GraspError::InvalidConfig(
            "protocol durations and closure must be positive".into(),
        ));
    }
    let open = (protocol.open_s * fs).round() as usize;
    let close = (protocol.close_s * fs).round() as usize;
    let travel = ((protocol.travel_s * fs).round() as usize).min(close / 2);
    let r0 = plant.baseline_ohm();
    let mut ohms = Vec::with_capacity((open + close) * protocol.cycles);
    let mut force = Vec::with_capacity(ohms.capacity());
    for _ in 0..protocol.cycles {
        let onset = plant.draw_onset(rng);
        let contact = plant.draw_contact(rng);
        for k in 0..open + close {
            let closure = if k < open {
                0.0
            } else {
                let j = k - open;
                let u = if j < travel {
                    j as f64 / travel as f64
                } else if j >= close - travel {
                    (close - j) as f64 / travel as f64
                } else {
                    1.0
                };
                protocol.closure_mm * u
            };
            let r = plant.resistance_at(closure, onset)?;
            ohms.push(measure(&plant.chain, r, rng).resistance_est - r0);
            force.push(plant.read_force(closure, onset, contact, rng));
        }
    }
    let mut trace = ResistanceTrace::new(fs, ohms);
    trace.force_n = Some(force);
    Ok(trace)
}
