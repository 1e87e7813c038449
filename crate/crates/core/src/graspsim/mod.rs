//! Resistance-feedback grasp loop: a phenomenological closure-to-deformation
//! plant and a stepping controller that stops at a target resistance.

mod batch;
mod controller;
mod plant;

use thiserror::Error;

use crate::sensemodel::SenseError;
use crate::sigproc::SigError;

pub use batch::{batch_run, episode_seed, write_episode_csv, BatchResult, BatchSummary};
pub use controller::{
    run_episode, step_controller, Action, ControllerConfig, ControllerState, GraspEpisode, Outcome, Sample,
};
pub use plant::{
    grasp_cycle_trace, CycleProtocol, GraspPlant, DEMO_HARD_CLOSURE_MM, DEMO_NOISE_OHM, DEMO_SOFT_CLOSURE_MM,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GraspError {
    #[error("invalid plant: {0}")]
    InvalidPlant(String),
    #[error("invalid controller config: {0}")]
    InvalidConfig(String),
    #[error("batch needs at least one episode")]
    EmptyBatch,
    #[error(transparent)]
    Sense(#[from] SenseError),
    #[error(transparent)]
    Signal(#[from] SigError),
}
