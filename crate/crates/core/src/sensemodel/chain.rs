use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::SenseError;

/// Constant-current source, compliance limit and instrumentation amplifier.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeasurementChain {
    pub current_a: f64,
    /// Compliance voltage of the current source.
    pub voltage_limit_v: f64,
    pub gain: f64,
    /// Gaussian noise at the amplifier output.
    pub noise_rms_v: f64,
    /// ADC step at the amplifier output; 0 disables quantisation.
    pub quantization_v: f64,
}

impl Default for MeasurementChain {
    fn default() -> Self {
        Self {
            current_a: 0.2,
            voltage_limit_v: 3.3,
            gain: 1.5,
            noise_rms_v: 0.0,
            quantization_v: 0.0,
        }
    }
}

impl MeasurementChain {
    pub fn with_current(current_a: f64) -> Self {
        Self {
            current_a,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), SenseError> {
        let bad = |name: &str, v: f64| Err(SenseError::InvalidChain(format!("{name} must be positive, got {v}")));
        if !(self.current_a > 0.0) {
            return bad("current", self.current_a);
        }
        if !(self.voltage_limit_v > 0.0) {
            return bad("voltage limit", self.voltage_limit_v);
        }
        if !(self.gain > 0.0) {
            return bad("gain", self.gain);
        }
        if !(self.noise_rms_v >= 0.0 && self.quantization_v >= 0.0) {
            return Err(SenseError::InvalidChain(
                "noise and quantisation must be non-negative".into(),
            ));
        }
        Ok(())
    }

    /// Noise RMS expressed in ohms.
    pub fn noise_rms_ohm(&self) -> f64 {
        self.noise_rms_v / (self.current_a * self.gain)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Measurement {
    pub voltage_out: f64,
    pub resistance_est: f64,
    /// The source hit its compliance limit.
    pub clipped: bool,
}

pub fn measure<R: Rng + ?Sized>(chain: &MeasurementChain, resistance_ohm: f64, rng: &mut R) -> Measurement {
    let drop = chain.current_a * resistance_ohm;
    let mut v = drop.min(chain.voltage_limit_v) * chain.gain;
    if chain.noise_rms_v > 0.0 {
        v += Normal::new(0.0, chain.noise_rms_v).expect("finite noise").sample(rng);
    }
    if chain.quantization_v > 0.0 {
        v = (v / chain.quantization_v).round() * chain.quantization_v;
    }
    Measurement {
        voltage_out: v,
        resistance_est: v / (chain.current_a * chain.gain),
        clipped: drop > chain.voltage_limit_v,
    }
}

pub fn measure_seeded(chain: &MeasurementChain, resistance_ohm: f64, seed: u64) -> Measurement {
    measure(chain, resistance_ohm, &mut ChaCha8Rng::seed_from_u64(seed))
}
