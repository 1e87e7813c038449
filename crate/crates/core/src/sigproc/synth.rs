use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{ResistanceTrace, SigError};

/// Square-wave grasp cycles with smooth edges, linear drift and white noise.
/// Each cycle starts with the open phase.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthSpec {
    pub sample_rate_hz: f64,
    pub period_s: f64,
    pub cycles: usize,
    pub open_fraction: f64,
    /// Duration of each raised-cosine edge, placed inside the closed phase.
    pub edge_s: f64,
    pub baseline_ohm: f64,
    pub amplitude_ohm: f64,
    /// Total linear drift accumulated from the first to the last sample.
    pub drift_ohm: f64,
    pub noise_sd_ohm: f64,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            sample_rate_hz: 1000.0,
            period_s: 6.0,
            cycles: 50,
            open_fraction: 0.5,
            edge_s: 0.2,
            baseline_ohm: 0.0,
            amplitude_ohm: 0.4,
            drift_ohm: 0.0,
            noise_sd_ohm: 0.0,
            seed: 0,
        }
    }
}

impl SynthSpec {
    pub fn samples_per_cycle(&self) -> usize {
        (self.period_s * self.sample_rate_hz).round() as usize
    }

    /// Noise- and drift-free cycle shape in `[0, 1]`.
    pub fn unit_cycle(&self) -> Vec<f64> {
        let p = self.samples_per_cycle();
        let open = (self.open_fraction * p as f64).round() as usize;
        let edge = ((self.edge_s * self.sample_rate_hz).round() as usize).min((p - open) / 2);
        (0..p)
            .map(|k| {
                if k < open {
                    0.0
                } else if edge > 0 && k < open + edge {
                    raised_cosine((k - open) as f64 / edge as f64)
                } else if edge > 0 && k >= p - edge {
                    raised_cosine((p - k) as f64 / edge as f64)
                } else {
                    1.0
                }
            })
            .collect()
    }

    /// Whether in-cycle sample `k` belongs to the flat open phase.
    pub fn is_baseline_sample(&self, k: usize) -> bool {
        let p = self.samples_per_cycle();
        k % p < (self.open_fraction * p as f64).round() as usize
    }
}

fn raised_cosine(u: f64) -> f64 {
    0.5 - 0.5 * (std::f64::consts::PI * u).cos()
}

/// Generates the trace. The cycle shape is indexed by integer sample so all
/// cycles are bit-identical before drift and noise are added.
pub fn synth_cycles(spec: &SynthSpec) -> Result<ResistanceTrace, SigError> {
    if !(spec.sample_rate_hz > 0.0 && spec.period_s > 0.0) || spec.samples_per_cycle() < 2 {
        return Err(SigError::InvalidParameter(
            "sample rate and period must give at least two samples per cycle".into(),
        ));
    }
    if !(0.0..1.0).contains(&spec.open_fraction) || spec.noise_sd_ohm < 0.0 || !spec.noise_sd_ohm.is_finite() {
        return Err(SigError::InvalidParameter(
            "open fraction must be in [0, 1) and noise SD non-negative".into(),
        ));
    }
    let shape = spec.unit_cycle();
    let p = shape.len();
    let n = p * spec.cycles;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let noise = Normal::new(0.0, spec.noise_sd_ohm).expect("noise SD validated");
    let span = n.saturating_sub(1).max(1) as f64;
    let ohms = (0..n)
        .map(|i| {
            let mut v = spec.baseline_ohm + spec.amplitude_ohm * shape[i % p];
            v += spec.drift_ohm * i as f64 / span;
            if spec.noise_sd_ohm > 0.0 {
                v += noise.sample(&mut rng);
            }
            v
        })
        .collect();
    Ok(ResistanceTrace::new(spec.sample_rate_hz, ohms))
}
