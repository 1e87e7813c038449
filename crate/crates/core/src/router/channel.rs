use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::search::{route_segment_excluding, Segment};
use super::{build_cost_field, CostField, Keypoint, RouterError};
use crate::geometry::{Connectivity, VoxelGrid, VoxelIndex};

/// Default channel radius in mm.
pub const DEFAULT_CHANNEL_RADIUS_MM: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RouteOptions {
    pub radius_mm: f64,
    pub interior_bias: f64,
    pub connectivity: Connectivity,
    /// Dilation (voxels) applied when blocking routed segments; `None` uses
    /// `2 * ceil(radius / voxel_size) + 1`.
    pub clearance_voxels: Option<usize>,
    /// Block only the routed centre line, with no dilation.
    pub centerline_only: bool,
}

impl Default for RouteOptions {
    fn default() -> Self {
        Self {
            radius_mm: DEFAULT_CHANNEL_RADIUS_MM,
            interior_bias: 0.0,
            connectivity: Connectivity::TwentySix,
            clearance_voxels: None,
            centerline_only: false,
        }
    }
}

impl RouteOptions {
    /// Smallest dilation that keeps a solid wall between two tubes of the
    /// given radius routed alongside each other.
    pub fn default_clearance(radius_mm: f64, voxel_size: f64) -> usize {
        2 * (radius_mm / voxel_size).ceil() as usize + 1
    }

    /// Dilation radius actually used for blocking on `grid`.
    pub fn effective_clearance(&self, grid: &VoxelGrid) -> usize {
        if self.centerline_only {
            0
        } else {
            self.clearance_voxels
                .unwrap_or_else(|| Self::default_clearance(self.radius_mm, grid.voxel_size()))
        }
    }
}

/// Ordered, non-repeating voxel centre line through all keypoints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelPath {
    pub voxels: Vec<VoxelIndex>,
    /// Position in `voxels` at which each keypoint is reached.
    pub keypoint_marks: Vec<usize>,
    pub radius_mm: f64,
    pub segment_costs: Vec<f64>,
    pub length_mm: f64,
    pub connectivity: Connectivity,
    /// Blocking dilation the path was routed with.
    pub clearance_voxels: usize,
}

impl ChannelPath {
    /// Builds a path from explicit voxels; length is computed from `grid`.
    pub fn from_voxels(
        grid: &VoxelGrid,
        voxels: Vec<VoxelIndex>,
        keypoint_marks: Vec<usize>,
        radius_mm: f64,
        connectivity: Connectivity,
    ) -> Self {
        let length_mm = polyline_length(grid, &voxels);
        Self {
            voxels,
            keypoint_marks,
            radius_mm,
            segment_costs: Vec::new(),
            length_mm,
            connectivity,
            clearance_voxels: 0,
        }
    }

    pub fn polyline(&self, grid: &VoxelGrid) -> Vec<[f64; 3]> {
        self.voxels
            .iter()
            .map(|&v| {
                let p = grid.center(v);
                [p.x, p.y, p.z]
            })
            .collect()
    }

    pub fn step_count(&self) -> usize {
        self.voxels.len().saturating_sub(1)
    }

    /// Centre-to-centre length (mm) of every step.
    pub fn step_lengths(&self, grid: &VoxelGrid) -> Vec<f64> {
        self.voxels
            .windows(2)
            .map(|w| (grid.center(w[1]) - grid.center(w[0])).norm())
            .collect()
    }

    pub fn first(&self) -> Option<VoxelIndex> {
        self.voxels.first().copied()
    }

    pub fn last(&self) -> Option<VoxelIndex> {
        self.voxels.last().copied()
    }

    /// Voxels belonging to segment `s` (both keypoint ends included).
    pub fn segment_voxels(&self, s: usize) -> &[VoxelIndex] {
        &self.voxels[self.keypoint_marks[s]..=self.keypoint_marks[s + 1]]
    }
}

pub fn polyline_length(grid: &VoxelGrid, voxels: &[VoxelIndex]) -> f64 {
    voxels
        .windows(2)
        .map(|w| (grid.center(w[1]) - grid.center(w[0])).norm())
        .sum()
}

/// Offsets within Euclidean distance `r` (voxels) of the origin.
pub fn ball_offsets(r: usize) -> Vec<[i32; 3]> {
    let r = r as i32;
    let mut out = Vec::new();
    for dz in -r..=r {
        for dy in -r..=r {
            for dx in -r..=r {
                if dx * dx + dy * dy + dz * dz <= r * r {
                    out.push([dx, dy, dz]);
                }
            }
        }
    }
    out
}

/// Segment-by-segment router. After each segment its voxels, dilated by the
/// clearance, are set to [`super::BLOCK_COST`], except the junction voxel where
/// the next segment starts. Voxels already on the channel are removed from
/// the graph so the centre line never repeats a voxel.
pub struct ChannelRouter<'g> {
    grid: &'g VoxelGrid,
    keypoints: Vec<VoxelIndex>,
    opts: RouteOptions,
    clearance: usize,
    base: CostField,
    costs: CostField,
    on_path: Vec<bool>,
    segments: Vec<Segment>,
    ball: Vec<[i32; 3]>,
}

impl<'g> ChannelRouter<'g> {
    pub fn new(grid: &'g VoxelGrid, keypoints: &[Keypoint], opts: &RouteOptions) -> Result<Self, RouterError> {
        Self::with_clearance(grid, keypoints, opts, opts.effective_clearance(grid))
    }

    fn with_clearance(
        grid: &'g VoxelGrid,
        keypoints: &[Keypoint],
        opts: &RouteOptions,
        clearance: usize,
    ) -> Result<Self, RouterError> {
        if keypoints.len() < 2 {
            return Err(RouterError::TooFewKeypoints(keypoints.len()));
        }
        let mut ordered = keypoints.to_vec();
        ordered.sort_by_key(|k| k.order);
        let keypoints: Vec<VoxelIndex> = ordered.iter().map(|k| k.snapped_index).collect();
        for (order, &idx) in keypoints.iter().enumerate() {
            if idx >= grid.len() || !grid.is_solid(idx) {
                return Err(RouterError::KeypointNotSolid { order, voxel: idx });
            }
        }
        if let Some(pos) = keypoints.windows(2).position(|w| w[0] == w[1]) {
            return Err(RouterError::DuplicateKeypoint { order: pos + 1 });
        }
        let base = build_cost_field(grid, opts.interior_bias);
        Ok(Self {
            grid,
            keypoints,
            opts: *opts,
            clearance,
            costs: base.clone(),
            base,
            on_path: vec![false; grid.len()],
            segments: Vec::new(),
            ball: ball_offsets(clearance),
        })
    }

    pub fn costs(&self) -> &CostField {
        &self.costs
    }

    pub fn clearance(&self) -> usize {
        self.clearance
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn is_done(&self) -> bool {
        self.segments.len() + 1 == self.keypoints.len()
    }

    /// Routes the next keypoint pair and marks it in the cost field.
    pub fn route_next(&mut self) -> Result<&Segment, RouterError> {
        let s = self.segments.len();
        assert!(!self.is_done(), "all segments routed");
        let (from, to) = (self.keypoints[s], self.keypoints[s + 1]);
        let segment = route_segment_excluding(
            self.grid,
            &self.costs,
            from,
            to,
            self.opts.connectivity,
            Some(&self.on_path),
        )
        .map_err(|_| RouterError::SegmentUnreachable {
            from_order: s,
            to_order: s + 1,
            from,
            to,
        })?;
        for &v in &segment.voxels {
            self.on_path[v] = true;
            let c = self.grid.coords(v);
            for &d in &self.ball {
                if let Some(n) = self.grid.offset(c, d) {
                    self.costs.block(n);
                }
            }
        }
        if s + 2 < self.keypoints.len() {
            // The next segment starts at the junction.
            self.costs.set(to, self.base.get(to));
            self.on_path[to] = false;
        }
        self.segments.push(segment);
        Ok(self.segments.last().unwrap())
    }

    /// Concatenates the routed segments into a path.
    pub fn finish(self) -> ChannelPath {
        assert!(self.is_done(), "unrouted segments remain");
        let mut voxels = Vec::new();
        let mut marks = vec![0];
        for seg in &self.segments {
            let skip = usize::from(!voxels.is_empty());
            voxels.extend_from_slice(&seg.voxels[skip..]);
            marks.push(voxels.len() - 1);
        }
        let length_mm = polyline_length(self.grid, &voxels);
        ChannelPath {
            voxels,
            keypoint_marks: marks,
            radius_mm: self.opts.radius_mm,
            segment_costs: self.segments.iter().map(|s| s.cost).collect(),
            length_mm,
            connectivity: self.opts.connectivity,
            clearance_voxels: self.clearance,
        }
    }
}

/// Routes every consecutive keypoint pair, then checks that no two segments
/// approach each other within the clearance away from the keypoints. On a
/// proximity failure the route is retried once with one more voxel of
/// clearance.
pub fn route_channel(
    grid: &VoxelGrid,
    keypoints: &[Keypoint],
    opts: &RouteOptions,
) -> Result<ChannelPath, RouterError> {
    let base = opts.effective_clearance(grid);
    let mut last_err = None;
    for clearance in [base, base + 1] {
        let mut router = ChannelRouter::with_clearance(grid, keypoints, opts, clearance)?;
        while !router.is_done() {
            router.route_next()?;
        }
        let path = router.finish();
        match proximity_conflicts(grid, &path, clearance).first() {
            None => return Ok(path),
            Some(&(a, b)) => {
                last_err = Some(RouterError::SelfProximity {
                    first: path.voxels[a],
                    second: path.voxels[b],
                    clearance_voxels: clearance,
                });
            }
        }
        if opts.centerline_only {
            break;
        }
    }
    Err(last_err.expect("loop ran"))
}

/// Pairs of path positions from different segments that lie within
/// `clearance` voxels of each other, excluding pairs that both sit within
/// `3 * clearance` of a common keypoint.
pub fn proximity_conflicts(grid: &VoxelGrid, path: &ChannelPath, clearance: usize) -> Vec<(usize, usize)> {
    if clearance == 0 || path.keypoint_marks.len() < 3 {
        return Vec::new();
    }
    let segment_of = |pos: usize| -> usize {
        path.keypoint_marks[1..]
            .iter()
            .position(|&m| pos <= m)
            .unwrap_or(path.keypoint_marks.len() - 2)
    };
    let position: HashMap<VoxelIndex, usize> = path.voxels.iter().enumerate().map(|(p, &v)| (v, p)).collect();
    let keypoint_coords: Vec<[usize; 3]> = path
        .keypoint_marks
        .iter()
        .map(|&m| grid.coords(path.voxels[m]))
        .collect();
    let near_zone = (3 * clearance) as f64;
    let dist = |a: [usize; 3], b: [usize; 3]| {
        let d = [0, 1, 2].map(|i| a[i] as f64 - b[i] as f64);
        (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt()
    };
    let ball = ball_offsets(clearance);
    let mut out = Vec::new();
    for (p, &v) in path.voxels.iter().enumerate() {
        let c = grid.coords(v);
        let seg_p = segment_of(p);
        for &d in &ball {
            let Some(n) = grid.offset(c, d) else { continue };
            let Some(&q) = position.get(&n) else { continue };
            if q <= p || segment_of(q) == seg_p {
                continue;
            }
            let cq = grid.coords(n);
            let excused = keypoint_coords
                .iter()
                .any(|&k| dist(c, k) <= near_zone && dist(cq, k) <= near_zone);
            if !excused {
                out.push((p, q));
            }
        }
    }
    out.sort_unstable();
    out
}
