use nalgebra::Point3;
use serde::{Deserialize, Serialize};

use super::RouterError;
use crate::geometry::{VoxelGrid, VoxelIndex};

/// Fraction of the solid's z-extent, measured from its bottom, that counts as
/// the base region for the inlet and outlet.
pub const DEFAULT_BASE_FRACTION: f64 = 0.1;
/// Snap radius in voxel sizes.
pub const DEFAULT_SNAP_RADIUS_VOXELS: f64 = 5.0;

/// A user keypoint after snapping to the lattice.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Keypoint {
    pub position: [f64; 3],
    pub snapped_index: VoxelIndex,
    pub order: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SnapOptions {
    /// Maximum snapping distance in mm; `None` means five voxel sizes.
    pub snap_radius_mm: Option<f64>,
    pub base_fraction: f64,
}

impl Default for SnapOptions {
    fn default() -> Self {
        Self {
            snap_radius_mm: None,
            base_fraction: DEFAULT_BASE_FRACTION,
        }
    }
}

/// Upper z bound (mm) of the base region: the bottom `fraction` of the solid's
/// z-extent.
pub fn base_region_top(grid: &VoxelGrid, fraction: f64) -> Option<f64> {
    let (lo, hi) = grid.solid_layer_range()?;
    let h = grid.voxel_size();
    let z0 = grid.origin().z + lo as f64 * h;
    let z1 = grid.origin().z + (hi + 1) as f64 * h;
    Some(z0 + fraction * (z1 - z0))
}

pub fn in_base_region(grid: &VoxelGrid, idx: VoxelIndex, fraction: f64) -> bool {
    base_region_top(grid, fraction).is_some_and(|top| grid.center(idx).z <= top)
}

/// Snaps each point to the nearest solid voxel centre. Equidistant candidates
/// resolve to the lower linear index.
pub fn snap_keypoints(
    grid: &VoxelGrid,
    points: &[Point3<f64>],
    opts: &SnapOptions,
) -> Result<Vec<Keypoint>, RouterError> {
    if points.len() < 2 {
        return Err(RouterError::TooFewKeypoints(points.len()));
    }
    if grid.solid_count() == 0 {
        return Err(RouterError::EmptyGrid);
    }
    let h = grid.voxel_size();
    let radius = opts.snap_radius_mm.unwrap_or(DEFAULT_SNAP_RADIUS_VOXELS * h);
    let mut out = Vec::with_capacity(points.len());
    for (order, p) in points.iter().enumerate() {
        let idx = nearest_solid(grid, p, radius).ok_or(RouterError::SnapFailed {
            order,
            point: [p.x, p.y, p.z],
            radius_mm: radius,
        })?;
        out.push(Keypoint {
            position: [p.x, p.y, p.z],
            snapped_index: idx,
            order,
        });
    }
    for kp in [out[0], out[out.len() - 1]] {
        if !in_base_region(grid, kp.snapped_index, opts.base_fraction) {
            return Err(RouterError::OutsideBase {
                order: kp.order,
                z_mm: grid.center(kp.snapped_index).z,
                base_top_mm: base_region_top(grid, opts.base_fraction).unwrap_or(f64::NAN),
            });
        }
    }
    Ok(out)
}

fn nearest_solid(grid: &VoxelGrid, p: &Point3<f64>, radius: f64) -> Option<VoxelIndex> {
    let h = grid.voxel_size();
    let c = grid.continuous_coords(p);
    let r = radius / h;
    let dims = grid.dims();
    let range = |a: usize| {
        let lo = (c[a] - 0.5 - r).floor().max(0.0) as i64;
        let hi = ((c[a] - 0.5 + r).ceil() as i64).min(dims[a] as i64 - 1);
        lo..=hi
    };
    let mut best: Option<(f64, VoxelIndex)> = None;
    for k in range(2) {
        for j in range(1) {
            for i in range(0) {
                let idx = grid.index(i as usize, j as usize, k as usize);
                if !grid.is_solid(idx) {
                    continue;
                }
                let d2 = (grid.center(idx) - p).norm_squared();
                if d2 > radius * radius {
                    continue;
                }
                if best.is_none_or(|(bd, bi)| d2 < bd || (d2 == bd && idx < bi)) {
                    best = Some((d2, idx));
                }
            }
        }
    }
    best.map(|(_, idx)| idx)
}
