use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::{in_base_region, ChannelPath, DEFAULT_BASE_FRACTION};
use crate::geometry::{depth_map, VoxelGrid, VoxelIndex};

pub const DEFAULT_MIN_WALL_VOXELS: u32 = 2;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ValidateOptions {
    pub min_wall_voxels: u32,
    pub base_fraction: f64,
}

impl Default for ValidateOptions {
    fn default() -> Self {
        Self {
            min_wall_voxels: DEFAULT_MIN_WALL_VOXELS,
            base_fraction: DEFAULT_BASE_FRACTION,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    /// Voxels at `position` and `position + 1` are not neighbours.
    NotAdjacent {
        position: usize,
    },
    /// `voxel` appears again at `second` after `first`.
    Repeated {
        voxel: VoxelIndex,
        first: usize,
        second: usize,
    },
    NotSolid {
        position: usize,
        voxel: VoxelIndex,
    },
    /// `position` is 0 (inlet) or the last index (outlet).
    EndpointOutsideBase {
        position: usize,
        voxel: VoxelIndex,
    },
    /// Depth below the surface is less than the tube radius plus the wall.
    ThinWall {
        position: usize,
        depth: u32,
        required: u32,
    },
}

impl Violation {
    /// Check letter, `a` to `e`.
    pub fn check(&self) -> char {
        match self {
            Self::NotAdjacent { .. } => 'a',
            Self::Repeated { .. } => 'b',
            Self::NotSolid { .. } => 'c',
            Self::EndpointOutsideBase { .. } => 'd',
            Self::ThinWall { .. } => 'e',
        }
    }
}

/// Structural and wall-thickness checks of a path against the uncarved grid.
pub fn validate_path(path: &ChannelPath, grid: &VoxelGrid, opts: &ValidateOptions) -> Vec<Violation> {
    let mut out = Vec::new();
    let in_grid = |v: VoxelIndex| v < grid.len();
    for (p, w) in path.voxels.windows(2).enumerate() {
        let adjacent = in_grid(w[0]) && in_grid(w[1]) && {
            let (a, b) = (grid.coords(w[0]), grid.coords(w[1]));
            let d: Vec<i64> = (0..3).map(|i| a[i] as i64 - b[i] as i64).collect();
            let l1: i64 = d.iter().map(|x| x.abs()).sum();
            d.iter().all(|x| x.abs() <= 1) && l1 >= 1 && (l1 == 1 || path.connectivity.offsets().len() == 26)
        };
        if !adjacent {
            out.push(Violation::NotAdjacent { position: p });
        }
    }
    let mut seen: HashMap<VoxelIndex, usize> = HashMap::new();
    for (p, &v) in path.voxels.iter().enumerate() {
        if let Some(&first) = seen.get(&v) {
            out.push(Violation::Repeated {
                voxel: v,
                first,
                second: p,
            });
        } else {
            seen.insert(v, p);
        }
    }
    for (p, &v) in path.voxels.iter().enumerate() {
        if !in_grid(v) || !grid.is_solid(v) {
            out.push(Violation::NotSolid { position: p, voxel: v });
        }
    }
    if let (Some(&first), Some(&last)) = (path.voxels.first(), path.voxels.last()) {
        let ends = if path.voxels.len() == 1 {
            vec![(0, first)]
        } else {
            vec![(0, first), (path.voxels.len() - 1, last)]
        };
        for (p, v) in ends {
            if in_grid(v) && !in_base_region(grid, v, opts.base_fraction) {
                out.push(Violation::EndpointOutsideBase { position: p, voxel: v });
            }
        }
    }
    let required = (path.radius_mm / grid.voxel_size()).ceil() as u32 + opts.min_wall_voxels;
    let depth = depth_map(grid);
    for (p, &v) in path.voxels.iter().enumerate() {
        if in_grid(v) && grid.is_solid(v) && depth[v] < required {
            out.push(Violation::ThinWall {
                position: p,
                depth: depth[v],
                required,
            });
        }
    }
    out
}
