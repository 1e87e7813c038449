use crate::geometry::{depth_map, VoxelGrid, VoxelIndex};

/// Traversal cost assigned to voxels of already routed segments.
pub const BLOCK_COST: f64 = 1e6;

/// Per-voxel traversal cost. Solid voxels cost at least 1; empty voxels are
/// not traversable and hold `f64::INFINITY`.
#[derive(Debug, Clone, PartialEq)]
pub struct CostField {
    costs: Vec<f64>,
}

impl CostField {
    pub fn from_costs(costs: Vec<f64>) -> Self {
        Self { costs }
    }

    /// Uniform cost 1 on every solid voxel.
    pub fn uniform(grid: &VoxelGrid) -> Self {
        build_cost_field(grid, 0.0)
    }

    #[inline]
    pub fn get(&self, idx: VoxelIndex) -> f64 {
        self.costs[idx]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.costs
    }

    #[inline]
    pub fn is_traversable(&self, idx: VoxelIndex) -> bool {
        self.costs[idx].is_finite()
    }

    /// Sets a traversable voxel to [`BLOCK_COST`]; empty voxels stay infinite.
    pub fn block(&mut self, idx: VoxelIndex) {
        if self.costs[idx].is_finite() {
            self.costs[idx] = BLOCK_COST;
        }
    }

    pub(crate) fn set(&mut self, idx: VoxelIndex, cost: f64) {
        self.costs[idx] = cost;
    }

    pub fn is_blocked(&self, idx: VoxelIndex) -> bool {
        self.costs[idx] == BLOCK_COST
    }

    /// Multiplies every finite cost by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            costs: self.costs.iter().map(|&c| c * factor).collect(),
        }
    }
}

/// `1 + w / (1 + d)` on solid voxels, where `d` is the city-block depth of
/// the voxel below the surface (1 for surface voxels). Larger `w` makes deep
/// voxels relatively cheaper and pulls channels towards the interior.
pub fn build_cost_field(grid: &VoxelGrid, interior_bias: f64) -> CostField {
    let w = interior_bias.max(0.0);
    let depth = if w > 0.0 { Some(depth_map(grid)) } else { None };
    let costs = (0..grid.len())
        .map(|idx| {
            if !grid.is_solid(idx) {
                f64::INFINITY
            } else if let Some(depth) = &depth {
                1.0 + w / (1.0 + depth[idx] as f64)
            } else {
                1.0
            }
        })
        .collect();
    CostField { costs }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Point3;

    fn block_grid() -> VoxelGrid {
        VoxelGrid::from_fn([22, 22, 22], 1.0, Point3::origin(), |i, j, k| {
            [i, j, k].iter().all(|&v| (1..21).contains(&v))
        })
        .unwrap()
    }

    #[test]
    fn zero_bias_is_uniform() {
        let g = block_grid();
        let f = build_cost_field(&g, 0.0);
        assert!(g.solid_indices().all(|i| f.get(i) == 1.0));
        assert_eq!(f.get(0), f64::INFINITY);
    }

    #[test]
    fn bias_formula() {
        let g = block_grid();
        let f = build_cost_field(&g, 4.0);
        // Surface voxel, depth 1.
        assert_eq!(f.get(g.index(1, 10, 10)), 3.0);
        // Depth 9.
        assert!((f.get(g.index(9, 10, 10)) - 1.4).abs() < 1e-15);
    }

    #[test]
    fn blocking_skips_empty_voxels() {
        let g = block_grid();
        let mut f = build_cost_field(&g, 0.0);
        f.block(0);
        f.block(g.index(5, 5, 5));
        assert_eq!(f.get(0), f64::INFINITY);
        assert_eq!(f.get(g.index(5, 5, 5)), BLOCK_COST);
    }
}
