//! Keypoint-driven channel routing over the solid voxel graph.

mod channel;
mod cost;
mod keypoints;
mod search;
mod validate;

use thiserror::Error;

use crate::geometry::VoxelIndex;

pub use channel::{
    ball_offsets, polyline_length, proximity_conflicts, route_channel, ChannelPath, ChannelRouter, RouteOptions,
    DEFAULT_CHANNEL_RADIUS_MM,
};
pub use cost::{build_cost_field, CostField, BLOCK_COST};
pub use keypoints::{
    base_region_top, in_base_region, snap_keypoints, Keypoint, SnapOptions, DEFAULT_BASE_FRACTION,
    DEFAULT_SNAP_RADIUS_VOXELS,
};
pub use search::{edge_weight, route_segment, route_segment_excluding, step_length, Segment};
pub use validate::{validate_path, ValidateOptions, Violation, DEFAULT_MIN_WALL_VOXELS};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RouterError {
    #[error("no path from voxel {from} to voxel {to}")]
    Unreachable { from: VoxelIndex, to: VoxelIndex },
    #[error("keypoints {from_order} -> {to_order} cannot be connected (voxels {from} -> {to})")]
    SegmentUnreachable {
        from_order: usize,
        to_order: usize,
        from: VoxelIndex,
        to: VoxelIndex,
    },
    #[error("at least 2 keypoints are required, got {0}")]
    TooFewKeypoints(usize),
    #[error("voxel grid has no solid voxels")]
    EmptyGrid,
    #[error("keypoint {order} at {point:?} is farther than {radius_mm:.3} mm from any solid voxel")]
    SnapFailed {
        order: usize,
        point: [f64; 3],
        radius_mm: f64,
    },
    #[error("keypoint {order} snaps to z = {z_mm:.3} mm, above the base region top {base_top_mm:.3} mm")]
    OutsideBase { order: usize, z_mm: f64, base_top_mm: f64 },
    #[error("keypoint {order} refers to non-solid voxel {voxel}")]
    KeypointNotSolid { order: usize, voxel: VoxelIndex },
    #[error("keypoint {order} snaps to the same voxel as the previous keypoint")]
    DuplicateKeypoint { order: usize },
    #[error("channel passes within {clearance_voxels} voxels of itself (voxels {first} and {second})")]
    SelfProximity {
        first: VoxelIndex,
        second: VoxelIndex,
        clearance_voxels: usize,
    },
}
