//! Solid voxelisation of watertight meshes.
//!
//! Triangles are rasterised conservatively into "surface" cells, the exterior
//! is flood-filled (6-connected) from the padded boundary through non-surface
//! cells, and every remaining non-surface cell is solid. Surface cells are
//! then resolved individually: a cell is solid when its centre lies inside the
//! mesh according to the angle-weighted pseudonormal at the closest surface
//! feature. The result is the set of cells whose centre is enclosed.

use std::collections::{HashMap, VecDeque};

use nalgebra::{Point3, Vector3};
use rayon::prelude::*;

use super::voxel::FACE_OFFSETS;
use super::{GeometryError, TriangleMesh, VoxelGrid};

/// Empty layers added on every face of the bounding box.
pub const GRID_PADDING: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VoxelizeOptions {
    pub voxel_size: f64,
    /// Upper bound on cells per axis, padding included.
    pub max_dim: usize,
}

impl VoxelizeOptions {
    pub const DEFAULT_MAX_DIM: usize = 512;
    /// Cells spanned by the longest bounding-box axis when no size is given.
    pub const DEFAULT_LONG_AXIS_CELLS: f64 = 128.0;

    pub fn with_voxel_size(voxel_size: f64) -> Self {
        Self {
            voxel_size,
            max_dim: Self::DEFAULT_MAX_DIM,
        }
    }
}

/// Voxel size at which the longest bounding-box axis spans 128 cells.
pub fn default_voxel_size(mesh: &TriangleMesh) -> f64 {
    let (lo, hi) = mesh.bbox().unwrap_or((Point3::origin(), Point3::new(1.0, 1.0, 1.0)));
    let extent = (hi - lo).max();
    if extent > 0.0 {
        extent / VoxelizeOptions::DEFAULT_LONG_AXIS_CELLS
    } else {
        1.0
    }
}

pub fn voxelize(mesh: &TriangleMesh, voxel_size: f64) -> Result<VoxelGrid, GeometryError> {
    voxelize_with(mesh, &VoxelizeOptions::with_voxel_size(voxel_size))
}

pub fn voxelize_with(mesh: &TriangleMesh, opts: &VoxelizeOptions) -> Result<VoxelGrid, GeometryError> {
    let h = opts.voxel_size;
    if !(h > 0.0 && h.is_finite()) {
        return Err(GeometryError::InvalidGrid(format!("voxel size {h} must be positive")));
    }
    if mesh.is_empty() {
        return Err(GeometryError::EmptyMesh);
    }
    if !mesh.diagnostics().watertight {
        return Err(GeometryError::NotWatertight);
    }
    let (lo, hi) = mesh.bbox().expect("non-empty mesh");
    let mut dims = [0usize; 3];
    let mut origin = [0.0; 3];
    for a in 0..3 {
        let first = (lo[a] / h).floor();
        let last = (hi[a] / h).ceil().max(first + 1.0);
        dims[a] = (last - first) as usize + 2 * GRID_PADDING;
        origin[a] = (first - GRID_PADDING as f64) * h;
    }
    if dims.iter().any(|&n| n > opts.max_dim) {
        return Err(GeometryError::GridTooLarge {
            dims,
            max: opts.max_dim,
            suggested_voxel_size: (hi - lo).max() / (opts.max_dim - 2 * GRID_PADDING - 1) as f64,
        });
    }
    let mut grid = VoxelGrid::empty(dims, h, Point3::from(origin))?;

    let hits = rasterize(mesh, &grid);
    let mut surface = vec![false; grid.len()];
    for &(cell, _) in &hits {
        surface[cell] = true;
    }
    let exterior = exterior_fill(&grid, &surface);

    for idx in 0..grid.len() {
        if !surface[idx] && !exterior[idx] {
            grid.set(idx, true);
        }
    }

    let by_cell = group_hits(&hits);
    let features = Pseudonormals::new(mesh);
    let surface_cells: Vec<usize> = by_cell.keys().copied().collect();
    let inside: Vec<(usize, bool)> = surface_cells
        .par_iter()
        .map(|&cell| {
            let c = grid.coords(cell);
            let mut candidates: Vec<u32> = Vec::new();
            for dz in -1..=1 {
                for dy in -1..=1 {
                    for dx in -1..=1 {
                        if let Some(n) = grid.offset(c, [dx, dy, dz]) {
                            if let Some(ts) = by_cell.get(&n) {
                                candidates.extend_from_slice(ts);
                            }
                        }
                    }
                }
            }
            candidates.sort_unstable();
            candidates.dedup();
            (cell, features.contains(mesh, &grid.center(cell), &candidates))
        })
        .collect();
    for (cell, solid) in inside {
        grid.set(cell, solid);
    }
    Ok(grid)
}

fn group_hits(hits: &[(usize, u32)]) -> HashMap<usize, Vec<u32>> {
    let mut by_cell: HashMap<usize, Vec<u32>> = HashMap::new();
    for &(cell, t) in hits {
        by_cell.entry(cell).or_default().push(t);
    }
    by_cell
}

/// (cell, triangle) pairs for every cell whose closed box touches a triangle.
fn rasterize(mesh: &TriangleMesh, grid: &VoxelGrid) -> Vec<(usize, u32)> {
    let h = grid.voxel_size();
    let half = Vector3::repeat(0.5 * h * (1.0 + 1e-7));
    let dims = grid.dims();
    let mut hits: Vec<(usize, u32)> = (0..mesh.triangles().len())
        .into_par_iter()
        .flat_map_iter(|t| {
            let tri = mesh.triangle(t);
            let lo = tri[0].inf(&tri[1]).inf(&tri[2]);
            let hi = tri[0].sup(&tri[1]).sup(&tri[2]);
            let clo = grid.continuous_coords(&lo);
            let chi = grid.continuous_coords(&hi);
            let range = |a: usize| {
                let a0 = ((clo[a] - 0.5).floor().max(0.0)) as usize;
                let a1 = ((chi[a] + 0.5).ceil() as usize).min(dims[a] - 1);
                a0..=a1
            };
            let mut out = Vec::new();
            for k in range(2) {
                for j in range(1) {
                    for i in range(0) {
                        let c = grid.center_of(i, j, k);
                        if triangle_box_overlap(&c, &half, &tri) {
                            out.push((grid.index(i, j, k), t as u32));
                        }
                    }
                }
            }
            out
        })
        .collect();
    hits.sort_unstable();
    hits
}

/// Cells reachable from the grid boundary without crossing a surface cell.
pub(crate) fn exterior_fill(grid: &VoxelGrid, blocked: &[bool]) -> Vec<bool> {
    let [nx, ny, nz] = grid.dims();
    let mut outside = vec![false; grid.len()];
    let mut queue = VecDeque::new();
    for k in 0..nz {
        for j in 0..ny {
            for i in 0..nx {
                let on_face = i == 0 || j == 0 || k == 0 || i == nx - 1 || j == ny - 1 || k == nz - 1;
                let idx = grid.index(i, j, k);
                if on_face && !blocked[idx] {
                    outside[idx] = true;
                    queue.push_back(idx);
                }
            }
        }
    }
    while let Some(idx) = queue.pop_front() {
        let c = grid.coords(idx);
        for d in FACE_OFFSETS {
            if let Some(n) = grid.offset(c, d) {
                if !blocked[n] && !outside[n] {
                    outside[n] = true;
                    queue.push_back(n);
                }
            }
        }
    }
    outside
}

/// Separating-axis test between an axis-aligned box and a triangle.
pub fn triangle_box_overlap(center: &Point3<f64>, half: &Vector3<f64>, tri: &[Point3<f64>; 3]) -> bool {
    let v = [tri[0] - center, tri[1] - center, tri[2] - center];
    let e = [v[1] - v[0], v[2] - v[1], v[0] - v[2]];

    // Nine edge cross-product axes.
    for edge in &e {
        for axis in [
            Vector3::new(0.0, -edge.z, edge.y),
            Vector3::new(edge.z, 0.0, -edge.x),
            Vector3::new(-edge.y, edge.x, 0.0),
        ] {
            let p = [axis.dot(&v[0]), axis.dot(&v[1]), axis.dot(&v[2])];
            let r = half.x * axis.x.abs() + half.y * axis.y.abs() + half.z * axis.z.abs();
            let min = p[0].min(p[1]).min(p[2]);
            let max = p[0].max(p[1]).max(p[2]);
            if min > r || max < -r {
                return false;
            }
        }
    }
    // Box face normals.
    for a in 0..3 {
        let min = v[0][a].min(v[1][a]).min(v[2][a]);
        let max = v[0][a].max(v[1][a]).max(v[2][a]);
        if min > half[a] || max < -half[a] {
            return false;
        }
    }
    // Triangle plane.
    let n = e[0].cross(&e[1]);
    let d = n.dot(&v[0]);
    let r = half.x * n.x.abs() + half.y * n.y.abs() + half.z * n.z.abs();
    d.abs() <= r
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Feature {
    Vertex(u32),
    Edge(u32, u32),
    Face,
}

/// Angle-weighted pseudonormals for inside/outside classification.
struct Pseudonormals {
    vertex: Vec<Vector3<f64>>,
    edge: HashMap<(u32, u32), Vector3<f64>>,
}

impl Pseudonormals {
    fn new(mesh: &TriangleMesh) -> Self {
        let mut vertex = vec![Vector3::zeros(); mesh.vertices().len()];
        let mut edge: HashMap<(u32, u32), Vector3<f64>> = HashMap::new();
        for (t, tri) in mesh.triangles().iter().enumerate() {
            let n = mesh.face_normal(t);
            let p = mesh.triangle(t);
            for c in 0..3 {
                let a = p[(c + 1) % 3] - p[c];
                let b = p[(c + 2) % 3] - p[c];
                let angle = a.angle(&b);
                if angle.is_finite() {
                    vertex[tri[c] as usize] += angle * n;
                }
                let (u, w) = (tri[c], tri[(c + 1) % 3]);
                *edge.entry((u.min(w), u.max(w))).or_insert_with(Vector3::zeros) += n;
            }
        }
        Self { vertex, edge }
    }

    fn contains(&self, mesh: &TriangleMesh, p: &Point3<f64>, candidates: &[u32]) -> bool {
        let mut best: Option<(f64, Point3<f64>, Vector3<f64>)> = None;
        for &t in candidates {
            let tri = mesh.triangle(t as usize);
            let (q, feature) = closest_point_on_triangle(p, &tri);
            let d2 = (p - q).norm_squared();
            if best.as_ref().is_some_and(|b| d2 >= b.0) {
                continue;
            }
            let ids = mesh.triangles()[t as usize];
            let normal = match feature {
                Feature::Face => mesh.face_normal(t as usize),
                Feature::Vertex(c) => self.vertex[ids[c as usize] as usize],
                Feature::Edge(a, b) => {
                    let (u, w) = (ids[a as usize], ids[b as usize]);
                    self.edge[&(u.min(w), u.max(w))]
                }
            };
            best = Some((d2, q, normal));
        }
        match best {
            Some((d2, q, n)) => d2 == 0.0 || (p - q).dot(&n) < 0.0,
            None => false,
        }
    }
}

/// Closest point on a triangle (Ericson, Real-Time Collision Detection 5.1.5).
fn closest_point_on_triangle(p: &Point3<f64>, tri: &[Point3<f64>; 3]) -> (Point3<f64>, Feature) {
    let [a, b, c] = *tri;
    let ab = b - a;
    let ac = c - a;
    let ap = p - a;
    let d1 = ab.dot(&ap);
    let d2 = ac.dot(&ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return (a, Feature::Vertex(0));
    }
    let bp = p - b;
    let d3 = ab.dot(&bp);
    let d4 = ac.dot(&bp);
    if d3 >= 0.0 && d4 <= d3 {
        return (b, Feature::Vertex(1));
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        let v = d1 / (d1 - d3);
        return (a + ab * v, Feature::Edge(0, 1));
    }
    let cp = p - c;
    let d5 = ab.dot(&cp);
    let d6 = ac.dot(&cp);
    if d6 >= 0.0 && d5 <= d6 {
        return (c, Feature::Vertex(2));
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        let w = d2 / (d2 - d6);
        return (a + ac * w, Feature::Edge(0, 2));
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        let w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return (b + (c - b) * w, Feature::Edge(1, 2));
    }
    let denom = 1.0 / (va + vb + vc);
    let v = vb * denom;
    let w = vc * denom;
    (a + ab * v + ac * w, Feature::Face)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::mesh::fixtures::{cuboid, uv_sphere};

    #[test]
    fn cube_is_exact() {
        let grid = voxelize(&cuboid([0.0; 3], [10.0; 3]), 1.0).unwrap();
        assert_eq!(grid.solid_count(), 1000);
        assert_eq!(grid.dims(), [14, 14, 14]);
    }

    #[test]
    fn offset_cube_is_exact() {
        let grid = voxelize(&cuboid([0.3, -4.2, 7.7], [10.3, 5.8, 17.7]), 1.0).unwrap();
        assert_eq!(grid.solid_count(), 1000);
    }

    #[test]
    fn padding_leaves_boundary_empty() {
        let grid = voxelize(&cuboid([0.0; 3], [3.0, 4.0, 5.0]), 0.5).unwrap();
        let [nx, ny, nz] = grid.dims();
        for idx in grid.solid_indices() {
            let [i, j, k] = grid.coords(idx);
            assert!(i >= 2 && j >= 2 && k >= 2 && i < nx - 2 && j < ny - 2 && k < nz - 2);
        }
    }

    #[test]
    fn sphere_volume_within_five_percent() {
        let mesh = uv_sphere([0.0; 3], 5.0, 48, 96);
        let grid = voxelize(&mesh, 0.5).unwrap();
        let vol = grid.solid_count() as f64 * 0.125;
        let exact = 4.0 / 3.0 * std::f64::consts::PI * 125.0;
        assert!((vol - exact).abs() / exact < 0.05, "{vol} vs {exact}");
    }

    #[test]
    fn rejects_open_mesh() {
        let m = cuboid([0.0; 3], [1.0; 3]);
        let open = TriangleMesh::new(m.vertices().to_vec(), m.triangles()[1..].to_vec()).unwrap();
        assert!(matches!(voxelize(&open, 0.1), Err(GeometryError::NotWatertight)));
    }

    #[test]
    fn rejects_oversized_grid() {
        let err = voxelize(&cuboid([0.0; 3], [100.0; 3]), 0.1).unwrap_err();
        match err {
            GeometryError::GridTooLarge {
                suggested_voxel_size, ..
            } => {
                assert!(voxelize(&cuboid([0.0; 3], [100.0; 3]), suggested_voxel_size).is_ok())
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn sat_separates_and_touches() {
        let tri = [
            Point3::new(0.0, 0.0, 0.0),
            Point3::new(1.0, 0.0, 0.0),
            Point3::new(0.0, 1.0, 0.0),
        ];
        let half = Vector3::repeat(0.25);
        assert!(triangle_box_overlap(&Point3::new(0.2, 0.2, 0.0), &half, &tri));
        assert!(triangle_box_overlap(&Point3::new(0.2, 0.2, 0.25), &half, &tri));
        assert!(!triangle_box_overlap(&Point3::new(0.2, 0.2, 0.3), &half, &tri));
        // Beyond the hypotenuse.
        assert!(!triangle_box_overlap(&Point3::new(0.9, 0.9, 0.0), &half, &tri));
    }

    #[test]
    fn closest_point_features() {
        let tri = [
            Point3::new(0.0, 0.0, 0.0),
            Point3::new(1.0, 0.0, 0.0),
            Point3::new(0.0, 1.0, 0.0),
        ];
        assert_eq!(
            closest_point_on_triangle(&Point3::new(-1.0, -1.0, 0.0), &tri).1,
            Feature::Vertex(0)
        );
        assert_eq!(
            closest_point_on_triangle(&Point3::new(0.5, -1.0, 0.0), &tri).1,
            Feature::Edge(0, 1)
        );
        let (q, f) = closest_point_on_triangle(&Point3::new(0.2, 0.2, 3.0), &tri);
        assert_eq!(f, Feature::Face);
        assert!((q - Point3::new(0.2, 0.2, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn deterministic_across_runs() {
        let mesh = uv_sphere([1.0, 2.0, 3.0], 4.0, 20, 40);
        let a = voxelize(&mesh, 0.37).unwrap();
        let b = voxelize(&mesh, 0.37).unwrap();
        assert_eq!(a, b);
    }
}
