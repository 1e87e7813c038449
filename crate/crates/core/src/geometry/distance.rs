//! Lattice distance transforms and connected-component labelling.

use std::collections::VecDeque;

use super::voxel::{Connectivity, FACE_OFFSETS};
use super::VoxelGrid;

/// City-block depth of each solid cell: the number of face steps to the
/// nearest empty cell, counting cells outside the grid as empty. Surface
/// cells have depth 1, empty cells 0.
pub fn depth_map(grid: &VoxelGrid) -> Vec<u32> {
    let mut depth = vec![u32::MAX; grid.len()];
    let mut queue = VecDeque::new();
    for (idx, depth) in depth.iter_mut().enumerate() {
        if !grid.is_solid(idx) {
            *depth = 0;
            continue;
        }
        let c = grid.coords(idx);
        let exposed = FACE_OFFSETS
            .iter()
            .any(|&d| grid.offset(c, d).is_none_or(|n| !grid.is_solid(n)));
        if exposed {
            *depth = 1;
            queue.push_back(idx);
        }
    }
    while let Some(idx) = queue.pop_front() {
        let next = depth[idx] + 1;
        let c = grid.coords(idx);
        for d in FACE_OFFSETS {
            if let Some(n) = grid.offset(c, d) {
                if depth[n] == u32::MAX {
                    depth[n] = next;
                    queue.push_back(n);
                }
            }
        }
    }
    depth
}

/// Labels connected components of the cells where `mask` is set.
/// Returns per-cell labels (`u32::MAX` outside the mask) and the count.
/// Labels are assigned in increasing order of each component's lowest index.
pub fn label_components(grid: &VoxelGrid, mask: &[bool], conn: Connectivity) -> (Vec<u32>, usize) {
    let mut labels = vec![u32::MAX; grid.len()];
    let mut count = 0u32;
    let mut queue = VecDeque::new();
    for seed in 0..grid.len() {
        if !mask[seed] || labels[seed] != u32::MAX {
            continue;
        }
        labels[seed] = count;
        queue.push_back(seed);
        while let Some(idx) = queue.pop_front() {
            for (n, _) in grid.neighbors(idx, conn) {
                if mask[n] && labels[n] == u32::MAX {
                    labels[n] = count;
                    queue.push_back(n);
                }
            }
        }
        count += 1;
    }
    (labels, count as usize)
}

/// Flood fill over `mask` from `start`; returns the visited set.
pub fn flood_fill(grid: &VoxelGrid, mask: &[bool], start: usize, conn: Connectivity) -> Vec<bool> {
    let mut seen = vec![false; grid.len()];
    if !mask[start] {
        return seen;
    }
    seen[start] = true;
    let mut queue = VecDeque::from([start]);
    while let Some(idx) = queue.pop_front() {
        for (n, _) in grid.neighbors(idx, conn) {
            if mask[n] && !seen[n] {
                seen[n] = true;
                queue.push_back(n);
            }
        }
    }
    seen
}

/// Empty cells connected (6-neighbourhood) to the grid boundary.
pub fn exterior_region(grid: &VoxelGrid) -> Vec<bool> {
    super::voxelize::exterior_fill(grid, grid.occupancy())
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Point3;

    fn block(n: usize, lo: usize, hi: usize) -> VoxelGrid {
        VoxelGrid::from_fn([n, n, n], 1.0, Point3::origin(), |i, j, k| {
            [i, j, k].iter().all(|&v| (lo..hi).contains(&v))
        })
        .unwrap()
    }

    #[test]
    fn depth_of_block() {
        let g = block(13, 2, 11);
        let d = depth_map(&g);
        assert_eq!(d[g.index(2, 5, 5)], 1);
        assert_eq!(d[g.index(3, 5, 5)], 2);
        assert_eq!(d[g.index(6, 6, 6)], 5);
        assert_eq!(d[g.index(0, 0, 0)], 0);
    }

    #[test]
    fn grid_boundary_counts_as_empty() {
        let g = block(5, 0, 5);
        let d = depth_map(&g);
        assert_eq!(d[g.index(0, 2, 2)], 1);
        assert_eq!(d[g.index(2, 2, 2)], 3);
    }

    #[test]
    fn components_by_connectivity() {
        let g = VoxelGrid::from_fn([4, 4, 4], 1.0, Point3::origin(), |i, j, k| {
            (i, j, k) == (1, 1, 1) || (i, j, k) == (2, 2, 2)
        })
        .unwrap();
        let mask = g.occupancy().to_vec();
        assert_eq!(label_components(&g, &mask, Connectivity::Six).1, 2);
        assert_eq!(label_components(&g, &mask, Connectivity::TwentySix).1, 1);
    }

    #[test]
    fn exterior_excludes_enclosed_cavity() {
        let g = VoxelGrid::from_fn([7, 7, 7], 1.0, Point3::origin(), |i, j, k| {
            let inside = [i, j, k].iter().all(|&v| (1..6).contains(&v));
            inside && (i, j, k) != (3, 3, 3)
        })
        .unwrap();
        let ext = exterior_region(&g);
        assert!(ext[g.index(0, 0, 0)]);
        assert!(!ext[g.index(3, 3, 3)]);
    }
}
