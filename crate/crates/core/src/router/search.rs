use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use super::{CostField, RouterError};
use crate::geometry::{Connectivity, VoxelGrid, VoxelIndex};

/// Ordered voxels of one routed segment and its accumulated cost.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub voxels: Vec<VoxelIndex>,
    pub cost: f64,
}

/// Length of a lattice step in voxel units.
#[inline]
pub fn step_length(d: [i32; 3]) -> f64 {
    match d[0].abs() + d[1].abs() + d[2].abs() {
        1 => 1.0,
        2 => std::f64::consts::SQRT_2,
        _ => 3f64.sqrt(),
    }
}

/// Edge weight: step length times the mean of the endpoint costs.
#[inline]
pub fn edge_weight(costs: &CostField, from: VoxelIndex, to: VoxelIndex, d: [i32; 3]) -> f64 {
    step_length(d) * 0.5 * (costs.get(from) + costs.get(to))
}

#[derive(Clone, Copy, PartialEq)]
struct Entry {
    cost: f64,
    idx: VoxelIndex,
}

impl Eq for Entry {}

impl Ord for Entry {
    // Reversed so the max-heap pops the smallest (cost, index) first.
    fn cmp(&self, other: &Self) -> Ordering {
        other.cost.total_cmp(&self.cost).then_with(|| other.idx.cmp(&self.idx))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Minimum-cost path between two traversable voxels.
pub fn route_segment(
    grid: &VoxelGrid,
    costs: &CostField,
    from: VoxelIndex,
    to: VoxelIndex,
    conn: Connectivity,
) -> Result<Segment, RouterError> {
    route_segment_excluding(grid, costs, from, to, conn, None)
}

/// As [`route_segment`], with voxels in `excluded` removed from the graph.
/// `from` is always allowed.
pub fn route_segment_excluding(
    grid: &VoxelGrid,
    costs: &CostField,
    from: VoxelIndex,
    to: VoxelIndex,
    conn: Connectivity,
    excluded: Option<&[bool]>,
) -> Result<Segment, RouterError> {
    let unreachable = || RouterError::Unreachable { from, to };
    let passable = |idx: VoxelIndex| costs.is_traversable(idx) && excluded.is_none_or(|ex| !ex[idx]);
    if !costs.is_traversable(from) || !passable(to) {
        return Err(unreachable());
    }
    let n = grid.len();
    let mut dist = vec![f64::INFINITY; n];
    let mut pred = vec![usize::MAX; n];
    let mut done = vec![false; n];
    let mut heap = BinaryHeap::new();
    dist[from] = 0.0;
    heap.push(Entry { cost: 0.0, idx: from });
    while let Some(Entry { cost, idx }) = heap.pop() {
        if done[idx] {
            continue;
        }
        done[idx] = true;
        if idx == to {
            break;
        }
        for (nb, d) in grid.neighbors(idx, conn) {
            if done[nb] || !passable(nb) {
                continue;
            }
            let candidate = cost + edge_weight(costs, idx, nb, d);
            if candidate < dist[nb] {
                dist[nb] = candidate;
                pred[nb] = idx;
                heap.push(Entry {
                    cost: candidate,
                    idx: nb,
                });
            }
        }
    }
    if !done[to] {
        return Err(unreachable());
    }
    let mut voxels = vec![to];
    let mut cur = to;
    while cur != from {
        cur = pred[cur];
        voxels.push(cur);
    }
    voxels.reverse();
    Ok(Segment { voxels, cost: dist[to] })
}
