use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{GraspError, GraspPlant};
use crate::sensemodel::measure;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControllerConfig {
    /// Stop threshold on ΔR above the channel baseline.
    pub target_ohm: f64,
    pub step_mm: f64,
    pub dwell_s: f64,
    pub max_closure_mm: f64,
    pub sample_rate_hz: f64,
}

impl Default for ControllerConfig {
    fn default() -> Self {
        Self {
            target_ohm: 0.125,
            step_mm: 1.0,
            dwell_s: 0.2,
            max_closure_mm: 80.0,
            sample_rate_hz: 1000.0,
        }
    }
}

impl ControllerConfig {
    pub fn validate(&self) -> Result<(), GraspError> {
        let all_positive = [
            self.target_ohm,
            self.step_mm,
            self.dwell_s,
            self.max_closure_mm,
            self.sample_rate_hz,
        ]
        .iter()
        .all(|v| v.is_finite() && *v > 0.0);
        if !all_positive {
            return Err(GraspError::InvalidConfig(
                "target, step, dwell, max closure and sample rate must be positive".into(),
            ));
        }
        Ok(())
    }

    pub fn dwell_samples(&self) -> usize {
        ((self.dwell_s * self.sample_rate_hz).round() as usize).max(1)
    }

    /// Upper bound on close steps plus the final stop.
    pub fn max_actions(&self) -> usize {
        (self.max_closure_mm / self.step_mm).ceil() as usize + 1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Action {
    CloseStep,
    Hold,
    Stop,
}

impl Action {
    pub fn as_str(self) -> &'static str {
        match self {
            Action::CloseStep => "close_step",
            Action::Hold => "hold",
            Action::Stop => "stop",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    TargetReached,
    MaxClosure,
    /// The measurement chain saturated, so readings could not be trusted.
    Aborted,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControllerState {
    pub closure_mm: f64,
    /// Readings already taken at the current closure.
    pub dwell_samples: usize,
}

/// Stops as soon as a reading reaches the target or the gripper is at its
/// limit, otherwise holds until the dwell is complete and then closes one
/// step. Every reading is checked, so a step is never held past the target.
pub fn step_controller(state: &ControllerState, reading_ohm: f64, cfg: &ControllerConfig) -> Action {
    if reading_ohm >= cfg.target_ohm || state.closure_mm >= cfg.max_closure_mm {
        Action::Stop
    } else if state.dwell_samples + 1 < cfg.dwell_samples() {
        Action::Hold
    } else {
        Action::CloseStep
    }
}

/// One controller tick.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub t_s: f64,
    pub closure_mm: f64,
    /// ΔR reading, baseline subtracted.
    pub ohms: f64,
    pub force_n: f64,
    pub action: Action,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraspEpisode {
    pub seed: u64,
    pub onset_mm: f64,
    pub timeline: Vec<Sample>,
    pub outcome: Outcome,
    pub stop_closure_mm: f64,
    /// Largest per-step mean reading; the step that triggers the stop is
    /// averaged up to and including the triggering sample.
    pub max_reading_ohm: f64,
    pub max_force_n: f64,
}

impl GraspEpisode {
    /// Close steps plus the terminal stop.
    pub fn decisions(&self) -> usize {
        self.timeline.iter().filter(|s| s.action != Action::Hold).count()
    }
}

/// Simulates one pick: the gripper starts open and closes in steps while
/// every reading goes through the plant's measurement chain.
pub fn run_episode(plant: &GraspPlant, cfg: &ControllerConfig, seed: u64) -> Result<GraspEpisode, GraspError> {
    plant.validate()?;
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let onset = plant.draw_onset(&mut rng);
    let contact = plant.draw_contact(&mut rng);
    let r0 = plant.baseline_ohm();
    let dt = 1.0 / cfg.sample_rate_hz;

    let mut state = ControllerState {
        closure_mm: 0.0,
        dwell_samples: 0,
    };
    let mut timeline = Vec::new();
    let mut step_sum = 0.0;
    let mut max_reading = f64::NEG_INFINITY;
    let mut max_force = 0.0f64;
    loop {
        let r = plant.resistance_at(state.closure_mm, onset)?;
        let m = measure(&plant.chain, r, &mut rng);
        let reading = m.resistance_est - r0;
        let force = plant.read_force(state.closure_mm, onset, contact, &mut rng);
        max_force = max_force.max(force);
        step_sum += reading;
        let action = if m.clipped {
            Action::Stop
        } else {
            step_controller(&state, reading, cfg)
        };
        timeline.push(Sample {
            t_s: timeline.len() as f64 * dt,
            closure_mm: state.closure_mm,
            ohms: reading,
            force_n: force,
            action,
        });
        match action {
            Action::Hold => state.dwell_samples += 1,
            Action::CloseStep | Action::Stop => {
                max_reading = max_reading.max(step_sum / (state.dwell_samples + 1) as f64);
                if action == Action::Stop {
                    let outcome = if m.clipped {
                        Outcome::Aborted
                    } else if reading >= cfg.target_ohm {
                        Outcome::TargetReached
                    } else {
                        Outcome::MaxClosure
                    };
                    return Ok(GraspEpisode {
                        seed,
                        onset_mm: onset,
                        timeline,
                        outcome,
                        stop_closure_mm: state.closure_mm,
                        max_reading_ohm: max_reading,
                        max_force_n: max_force,
                    });
                }
                state = ControllerState {
                    closure_mm: (state.closure_mm + cfg.step_mm).min(cfg.max_closure_mm),
                    dwell_samples: 0,
                };
                step_sum = 0.0;
            }
        }
    }
}
