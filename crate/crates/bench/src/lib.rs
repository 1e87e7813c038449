//! Fixtures shared by the benchmarks.

use channelforge::geometry::{default_voxel_size, demo_coral, demo_keypoints, voxelize};
use channelforge::router::{build_cost_field, snap_keypoints, CostField, Keypoint, SnapOptions};
use channelforge::sigproc::{synth_cycles, ResistanceTrace, SynthSpec};
use channelforge::VoxelGrid;

/// Demo coral at the default resolution.
pub fn demo_grid() -> VoxelGrid {
    let mesh = demo_coral();
    voxelize(&mesh, default_voxel_size(&mesh)).expect("demo coral voxelises")
}

/// Cost field and snapped demo keypoints on `grid`.
pub fn demo_route_inputs(grid: &VoxelGrid, interior_bias: f64) -> (CostField, Vec<Keypoint>) {
    let kps = snap_keypoints(grid, &demo_keypoints(), &SnapOptions::default()).expect("demo keypoints snap");
    (build_cost_field(grid, interior_bias), kps)
}

/// Drifting cyclic trace at 1 kHz with a 6 s period.
pub fn drifting_trace(cycles: usize) -> ResistanceTrace {
    synth_cycles(&SynthSpec {
        cycles,
        drift_ohm: 0.2,
        noise_sd_ohm: 1e-3,
        seed: 7,
        ..SynthSpec::default()
    })
    .expect("valid synthetic spec")
}
