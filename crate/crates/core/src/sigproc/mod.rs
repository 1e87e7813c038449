//! Analysis of resistance traces: drift removal, cycle segmentation and
//! summary statistics.

mod cycles;
mod drift;
mod stats;
mod synth;
mod trace;

use thiserror::Error;

pub use cycles::{cycle_stats, segment_cycles, write_plot_csv, CycleStats, CycleWindow, StatsSummary};
pub use drift::{butterworth_highpass, filtfilt, remove_drift, Biquad, DriftMethod, DriftOptions};
pub use stats::{box_stats, quantile, BoxStats};
pub use synth::{synth_cycles, SynthSpec};
pub use trace::{ingest_csv, write_csv, ResistanceTrace, UNIFORM_DT_TOLERANCE_S};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SigError {
    #[error("CSV error: {0}")]
    Csv(String),
    #[error("expected header t_s,ohms[,force_n], found {0:?}")]
    Header(String),
    #[error("data row {row}: {message}")]
    Row { row: usize, message: String },
    #[error("data row {row}: time step {dt} s differs from {expected} s")]
    NonUniform { row: usize, dt: f64, expected: f64 },
    #[error("trace has {got} samples, at least {needed} are required")]
    TooShort { needed: usize, got: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("windows must be non-empty and of equal length")]
    UnequalWindows,
}
