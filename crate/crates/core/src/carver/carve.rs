use nalgebra::Point3;
use serde::{Deserialize, Serialize};

use super::CarveError;
use crate::geometry::{extract_surface, label_components, Connectivity, TriangleMesh, VoxelGrid, VoxelIndex};
use crate::router::{validate_path, ChannelPath, ValidateOptions, DEFAULT_MIN_WALL_VOXELS};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CarveOptions {
    /// Shrinkage compensation applied to the path radius.
    pub radius_multiplier: f64,
    pub min_wall_voxels: u32,
}

impl Default for CarveOptions {
    fn default() -> Self {
        Self {
            radius_multiplier: 1.0,
            min_wall_voxels: DEFAULT_MIN_WALL_VOXELS,
        }
    }
}

/// Solid with the channel (and, once opened, the port shafts) removed.
#[derive(Debug, Clone, PartialEq)]
pub struct CarvedModel {
    pub grid: VoxelGrid,
    /// Cells removed by the tube, sorted.
    pub channel_voxels: Vec<VoxelIndex>,
    /// Cells removed by the port shafts, sorted and disjoint from `channel_voxels`.
    pub port_voxels: Vec<VoxelIndex>,
    pub ports_opened: bool,
    pub inlet: VoxelIndex,
    pub outlet: VoxelIndex,
    pub path: ChannelPath,
    /// Channel cells whose wall to the original exterior is thinner than the minimum.
    pub wall_warnings: Vec<VoxelIndex>,
    pub effective_radius_mm: f64,
}

/// Everything in a [`CarvedModel`] except the grid, for JSON storage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CarveRecord {
    pub channel_voxels: Vec<VoxelIndex>,
    pub port_voxels: Vec<VoxelIndex>,
    pub ports_opened: bool,
    pub inlet: VoxelIndex,
    pub outlet: VoxelIndex,
    pub path: ChannelPath,
    pub wall_warnings: Vec<VoxelIndex>,
    pub effective_radius_mm: f64,
}

impl CarvedModel {
    pub fn record(&self) -> CarveRecord {
        CarveRecord {
            channel_voxels: self.channel_voxels.clone(),
            port_voxels: self.port_voxels.clone(),
            ports_opened: self.ports_opened,
            inlet: self.inlet,
            outlet: self.outlet,
            path: self.path.clone(),
            wall_warnings: self.wall_warnings.clone(),
            effective_radius_mm: self.effective_radius_mm,
        }
    }

    pub fn from_record(grid: VoxelGrid, record: CarveRecord) -> Result<Self, CarveError> {
        let bad = |v: &VoxelIndex| *v >= grid.len() || grid.is_solid(*v);
        if record.channel_voxels.iter().chain(&record.port_voxels).any(bad) {
            return Err(CarveError::Inconsistent("carved cell is solid or out of range".into()));
        }
        Ok(Self {
            grid,
            channel_voxels: record.channel_voxels,
            port_voxels: record.port_voxels,
            ports_opened: record.ports_opened,
            inlet: record.inlet,
            outlet: record.outlet,
            path: record.path,
            wall_warnings: record.wall_warnings,
            effective_radius_mm: record.effective_radius_mm,
        })
    }

    /// The grid before carving.
    pub fn original_grid(&self) -> VoxelGrid {
        let mut g = self.grid.clone();
        for &v in self.channel_voxels.iter().chain(&self.port_voxels) {
            g.set(v, true);
        }
        g
    }

    /// Mask of every carved cell.
    pub fn void_mask(&self) -> Vec<bool> {
        let mut m = vec![false; self.grid.len()];
        for &v in self.channel_voxels.iter().chain(&self.port_voxels) {
            m[v] = true;
        }
        m
    }
}

fn distance_to_segment(p: &Point3<f64>, a: &Point3<f64>, b: &Point3<f64>) -> f64 {
    let ab = b - a;
    let len2 = ab.norm_squared();
    let t = if len2 > 0.0 {
        ((p - a).dot(&ab) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    (p - (a + t * ab)).norm()
}

/// Removes every solid cell whose centre lies within the (scaled) path radius
/// of the centre-line polyline. Centre-line cells are always removed, so a
/// radius below half a voxel still leaves a one-voxel tube.
pub fn carve(grid: &VoxelGrid, path: &ChannelPath, opts: &CarveOptions) -> Result<CarvedModel, CarveError> {
    if path.voxels.is_empty() {
        return Err(CarveError::EmptyPath);
    }
    let structural: Vec<_> = validate_path(
        path,
        grid,
        &ValidateOptions {
            min_wall_voxels: 0,
            ..Default::default()
        },
    )
    .into_iter()
    .filter(|v| matches!(v.check(), 'a' | 'b' | 'c'))
    .collect();
    if !structural.is_empty() {
        return Err(CarveError::InvalidPath(structural));
    }
    let h = grid.voxel_size();
    let radius = path.radius_mm * opts.radius_multiplier;
    let reach = (radius / h).ceil() as i64;
    let dims = grid.dims();

    let mut candidate = vec![false; grid.len()];
    for &v in &path.voxels {
        candidate[v] = true;
    }
    let pieces: Vec<(VoxelIndex, VoxelIndex)> = if path.voxels.len() == 1 {
        vec![(path.voxels[0], path.voxels[0])]
    } else {
        path.voxels.windows(2).map(|w| (w[0], w[1])).collect()
    };
    for (va, vb) in pieces {
        let (a, b) = (grid.center(va), grid.center(vb));
        let (ca, cb) = (grid.coords(va), grid.coords(vb));
        let lo: Vec<i64> = (0..3).map(|i| (ca[i].min(cb[i]) as i64 - reach).max(0)).collect();
        let hi: Vec<i64> = (0..3)
            .map(|i| (ca[i].max(cb[i]) as i64 + reach).min(dims[i] as i64 - 1))
            .collect();
        for k in lo[2]..=hi[2] {
            for j in lo[1]..=hi[1] {
                for i in lo[0]..=hi[0] {
                    let idx = grid.index(i as usize, j as usize, k as usize);
                    if !candidate[idx] && grid.is_solid(idx) && distance_to_segment(&grid.center(idx), &a, &b) <= radius
                    {
                        candidate[idx] = true;
                    }
                }
            }
        }
    }
    // Keep only the piece attached to the centre line; cells across a gap
    // in the solid would otherwise become isolated voids.
    let (labels, _) = label_components(grid, &candidate, Connectivity::TwentySix);
    let keep = labels[path.voxels[0]];
    let channel_voxels: Vec<VoxelIndex> = (0..grid.len()).filter(|&i| labels[i] == keep).collect();

    let mut carved = grid.clone();
    for &v in &channel_voxels {
        carved.set(v, false);
    }
    let before = label_components(grid, grid.occupancy(), Connectivity::Six).1;
    let after = label_components(&carved, carved.occupancy(), Connectivity::Six).1;
    if after > before {
        return Err(CarveError::Disconnected { before, after });
    }

    let wall_warnings = thin_wall_cells(grid, &channel_voxels, opts.min_wall_voxels);
    Ok(CarvedModel {
        grid: carved,
        channel_voxels,
        port_voxels: Vec::new(),
        ports_opened: false,
        inlet: path.voxels[0],
        outlet: *path.voxels.last().unwrap(),
        path: path.clone(),
        wall_warnings,
        effective_radius_mm: radius,
    })
}

/// Channel cells within `min_wall` face steps of the original exterior.
fn thin_wall_cells(original: &VoxelGrid, channel: &[VoxelIndex], min_wall: u32) -> Vec<VoxelIndex> {
    if min_wall == 0 {
        return Vec::new();
    }
    let exterior = crate::geometry::exterior_region(original);
    let mut dist = vec![u32::MAX; original.len()];
    let mut queue = std::collections::VecDeque::new();
    for (i, &e) in exterior.iter().enumerate() {
        if e {
            dist[i] = 0;
            queue.push_back(i);
        }
    }
    while let Some(i) = queue.pop_front() {
        if dist[i] >= min_wall {
            continue;
        }
        for (n, _) in original.neighbors(i, Connectivity::Six) {
            if dist[n] == u32::MAX {
                dist[n] = dist[i] + 1;
                queue.push_back(n);
            }
        }
    }
    // Cells on the grid border touch the outside directly.
    let [nx, ny, nz] = original.dims();
    let border = |c: [usize; 3]| {
        (0..3)
            .map(|a| c[a].min([nx, ny, nz][a] - 1 - c[a]) as u32 + 1)
            .min()
            .unwrap()
    };
    channel
        .iter()
        .copied()
        .filter(|&v| dist[v].min(border(original.coords(v))) <= min_wall)
        .collect()
}

/// Surface mesh of the carved solid.
pub fn export_printable(model: &CarvedModel, smoothing_iters: usize) -> Result<TriangleMesh, CarveError> {
    Ok(extract_surface(&model.grid, smoothing_iters)?)
}
