use serde::{Deserialize, Serialize};

use super::CarvedModel;
use crate::geometry::VoxelGrid;

pub const DEFAULT_MIN_CIRCULARITY: f64 = 0.6;
pub const DEFAULT_MAX_ANGLE_DEG: f64 = 60.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    pub min_circularity: f64,
    pub max_angle_deg: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            min_circularity: DEFAULT_MIN_CIRCULARITY,
            max_angle_deg: DEFAULT_MAX_ANGLE_DEG,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Section {
    /// Cell count times the cell face area.
    pub area_mm2: f64,
    /// Length of the iso-contour around the section.
    pub perimeter_mm: f64,
    pub circularity: f64,
    pub flagged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SliceReport {
    pub z_mm: f64,
    pub sections: Vec<Section>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TangentSample {
    pub path_index: usize,
    pub angle_deg: f64,
    pub flagged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrintabilityReport {
    /// `"pass"` or `"flagged"`.
    pub overall: String,
    pub thresholds: Thresholds,
    pub flagged_slices: usize,
    pub flagged_samples: usize,
    pub slices: Vec<SliceReport>,
    pub tangents: Vec<TangentSample>,
}

impl PrintabilityReport {
    pub fn passed(&self) -> bool {
        self.overall == "pass"
    }
}

/// Area and perimeter (cell units) of the marching-squares contour at level
/// 0.5 around the set cells of a 2D mask sampled at cell centres. Diagonal
/// saddles are joined, matching 8-connected sections.
pub fn contour_metrics(mask: &[bool], nx: usize, ny: usize) -> (f64, f64) {
    let at = |i: i64, j: i64| {
        i >= 0 && j >= 0 && (i as usize) < nx && (j as usize) < ny && mask[j as usize * nx + i as usize]
    };
    let half_diag = std::f64::consts::FRAC_1_SQRT_2;
    let (mut area, mut perimeter) = (0.0, 0.0);
    // Dual squares spanning cell centres (i, j) .. (i + 1, j + 1).
    for j in -1..ny as i64 {
        for i in -1..nx as i64 {
            let c = [at(i, j), at(i + 1, j), at(i + 1, j + 1), at(i, j + 1)];
            let n = c.iter().filter(|&&b| b).count();
            let (a, p) = match n {
                0 => (0.0, 0.0),
                1 => (0.125, half_diag),
                2 if c[0] == c[2] => (0.75, 2.0 * half_diag),
                2 => (0.5, 1.0),
                3 => (0.875, half_diag),
                _ => (1.0, 0.0),
            };
            area += a;
            perimeter += p;
        }
    }
    (area, perimeter)
}

/// Per-slice cross-section shape and per-sample overhang check.
pub fn printability_check(model: &CarvedModel, thresholds: &Thresholds) -> PrintabilityReport {
    let grid = &model.grid;
    let slices = slice_sections(grid, &model.void_mask(), thresholds.min_circularity);
    let tangents = tangent_samples(grid, &model.path.voxels, thresholds.max_angle_deg);
    let flagged_slices = slices.iter().filter(|s| s.sections.iter().any(|x| x.flagged)).count();
    let flagged_samples = tangents.iter().filter(|t| t.flagged).count();
    PrintabilityReport {
        overall: if flagged_slices + flagged_samples == 0 {
            "pass"
        } else {
            "flagged"
        }
        .to_string(),
        thresholds: *thresholds,
        flagged_slices,
        flagged_samples,
        slices,
        tangents,
    }
}

fn slice_sections(grid: &VoxelGrid, void: &[bool], min_circularity: f64) -> Vec<SliceReport> {
    use rayon::prelude::*;
    let [nx, ny, nz] = grid.dims();
    let h = grid.voxel_size();
    let layer = nx * ny;
    (0..nz)
        .into_par_iter()
        .filter_map(|k| {
            let plane = &void[k * layer..(k + 1) * layer];
            if !plane.iter().any(|&b| b) {
                return None;
            }
            let sections = label_2d(plane, nx, ny)
                .into_iter()
                .map(|cells| {
                    let mut mask = vec![false; layer];
                    for &c in &cells {
                        mask[c] = true;
                    }
                    let (a, p) = contour_metrics(&mask, nx, ny);
                    let circularity = (4.0 * std::f64::consts::PI * a / (p * p)).min(1.0);
                    Section {
                        area_mm2: cells.len() as f64 * h * h,
                        perimeter_mm: p * h,
                        circularity,
                        flagged: circularity < min_circularity,
                    }
                })
                .collect();
            Some(SliceReport {
                z_mm: grid.origin().z + (k as f64 + 0.5) * h,
                sections,
            })
        })
        .collect()
}

/// 8-connected components of a 2D mask, in order of their lowest cell.
fn label_2d(mask: &[bool], nx: usize, ny: usize) -> Vec<Vec<usize>> {
    let mut seen = vec![false; mask.len()];
    let mut out = Vec::new();
    for seed in 0..mask.len() {
        if !mask[seed] || seen[seed] {
            continue;
        }
        seen[seed] = true;
        let mut stack = vec![seed];
        let mut cells = Vec::new();
        while let Some(c) = stack.pop() {
            cells.push(c);
            let (i, j) = ((c % nx) as i64, (c / nx) as i64);
            for dj in -1..=1 {
                for di in -1..=1 {
                    let (a, b) = (i + di, j + dj);
                    if a < 0 || b < 0 || a >= nx as i64 || b >= ny as i64 {
                        continue;
                    }
                    let n = b as usize * nx + a as usize;
                    if mask[n] && !seen[n] {
                        seen[n] = true;
                        stack.push(n);
                    }
                }
            }
        }
        cells.sort_unstable();
        out.push(cells);
    }
    out
}

/// Angle from the build axis of the central difference over five samples,
/// narrowed at the path ends.
fn tangent_samples(grid: &VoxelGrid, voxels: &[usize], max_angle_deg: f64) -> Vec<TangentSample> {
    let n = voxels.len();
    if n < 2 {
        return Vec::new();
    }
    (0..n)
        .map(|i| {
            let a = grid.center(voxels[i.saturating_sub(2)]);
            let b = grid.center(voxels[(i + 2).min(n - 1)]);
            let t = b - a;
            let angle_deg = (t.z.abs() / t.norm()).clamp(0.0, 1.0).acos().to_degrees();
            TangentSample {
                path_index: i,
                angle_deg,
                flagged: angle_deg > max_angle_deg,
            }
        })
        .collect()
}
