//! Electrical model of the liquid-metal channel and its 4-wire measurement.

mod chain;
mod electrical;
mod plant;

use thiserror::Error;

pub use chain::{measure, measure_seeded, Measurement, MeasurementChain};
pub use electrical::{
    baseline_resistance, calibrate_resistivity, deformed_resistance, ChannelElectrical, DeformationProfile,
};
pub(crate) use plant::interpolate;
pub use plant::{
    sensitivity_table, squeeze_profile, write_sensitivity_csv, CompressionPlant, SensitivityRow,
    DEFAULT_COMPRESSED_FRACTION,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SenseError {
    #[error("channel has zero length")]
    ZeroLength,
    #[error("channel radius must be positive, got {0}")]
    InvalidRadius(f64),
    #[error("resistivity must be positive, got {0}")]
    InvalidResistivity(f64),
    #[error("target resistance must be positive, got {0}")]
    InvalidTarget(f64),
    #[error("area scale at step {index} is {value}; it must lie in (0, 1]")]
    InvalidScale { index: usize, value: f64 },
    #[error("deformation profile has {got} steps, channel has {expected}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("force {force} N is outside the plant range [{min}, {max}] N")]
    ForceOutOfRange { force: f64, min: f64, max: f64 },
    #[error("plant has no calibration for {0} A")]
    UnknownCurrent(f64),
    #[error("invalid plant: {0}")]
    InvalidPlant(String),
    #[error("invalid measurement chain: {0}")]
    InvalidChain(String),
}
