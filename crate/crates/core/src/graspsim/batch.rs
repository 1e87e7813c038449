use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{run_episode, ControllerConfig, GraspEpisode, GraspError, GraspPlant, Outcome};
use crate::sigproc::{box_stats, BoxStats};

const SEED_STRIDE: u64 = 0x9E37_79B9_7F4A_7C15;

/// Seed of episode `index`; episode 0 uses the batch seed itself.
pub fn episode_seed(batch_seed: u64, index: usize) -> u64 {
    batch_seed.wrapping_add((index as u64).wrapping_mul(SEED_STRIDE))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchResult {
    pub seed: u64,
    pub episodes: Vec<GraspEpisode>,
    pub max_reading: BoxStats,
    pub max_force: BoxStats,
}

/// Batch summary without the per-sample logs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchSummary {
    pub seed: u64,
    pub episodes: usize,
    pub target_reached: usize,
    pub max_closure: usize,
    pub aborted: usize,
    pub target_ohm: f64,
    pub max_readings_ohm: Vec<f64>,
    pub stop_closures_mm: Vec<f64>,
    pub max_reading_ohm: BoxStats,
    pub max_force_n: BoxStats,
}

impl BatchResult {
    pub fn count(&self, outcome: Outcome) -> usize {
        self.episodes.iter().filter(|e| e.outcome == outcome).count()
    }

    pub fn summary(&self, cfg: &ControllerConfig) -> BatchSummary {
        BatchSummary {
            seed: self.seed,
            episodes: self.episodes.len(),
            target_reached: self.count(Outcome::TargetReached),
            max_closure: self.count(Outcome::MaxClosure),
            aborted: self.count(Outcome::Aborted),
            target_ohm: cfg.target_ohm,
            max_readings_ohm: self.episodes.iter().map(|e| e.max_reading_ohm).collect(),
            stop_closures_mm: self.episodes.iter().map(|e| e.stop_closure_mm).collect(),
            max_reading_ohm: self.max_reading.clone(),
            max_force_n: self.max_force.clone(),
        }
    }
}

/// Runs `n` independent episodes in parallel. Results are ordered by
/// episode index and depend only on `seed`.
pub fn batch_run(plant: &GraspPlant, cfg: &ControllerConfig, n: usize, seed: u64) -> Result<BatchResult, GraspError> {
    if n == 0 {
        return Err(GraspError::EmptyBatch);
    }
    let episodes = (0..n)
        .into_par_iter()
        .map(|i| run_episode(plant, cfg, episode_seed(seed, i)))
        .collect::<Result<Vec<_>, _>>()?;
    let readings: Vec<f64> = episodes.iter().map(|e| e.max_reading_ohm).collect();
    let forces: Vec<f64> = episodes.iter().map(|e| e.max_force_n).collect();
    Ok(BatchResult {
        seed,
        max_reading: box_stats(&readings)?,
        max_force: box_stats(&forces)?,
        episodes,
    })
}

/// Episode log with columns `t_s, closure_mm, ohms, action`.
pub fn write_episode_csv<W: std::io::Write>(episode: &GraspEpisode, out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["t_s", "closure_mm", "ohms", "action"])?;
    for s in &episode.timeline {
        w.write_record([
            s.t_s.to_string(),
            s.closure_mm.to_string(),
            s.ohms.to_string(),
            s.action.as_str().to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
