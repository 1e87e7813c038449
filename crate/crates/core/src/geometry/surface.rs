//! Iso-surface extraction and smoothing.
//!
//! Marching cubes over a sampled scalar field. The case table is derived once
//! from a fixed face rule: on a face whose inside corners sit on a diagonal,
//! the inside corners are kept separate. Neighbouring cubes therefore always
//! agree on shared faces and the output is a closed, consistently oriented
//! 2-manifold. Inside cells are face-connected; outside cells connect through
//! edges and corners too.

use std::collections::HashMap;
use std::sync::OnceLock;

use nalgebra::{Point3, Vector3};

use super::{GeometryError, TriangleMesh, VoxelGrid};

/// Corner `c` sits at offset `(c & 1, (c >> 1) & 1, (c >> 2) & 1)`.
const fn corner(c: usize) -> [usize; 3] {
    [c & 1, (c >> 1) & 1, (c >> 2) & 1]
}

/// Edges as (low corner, axis); the high corner is `low | 1 << axis`.
const EDGES: [(usize, usize); 12] = [
    (0, 0),
    (2, 0),
    (4, 0),
    (6, 0),
    (0, 1),
    (1, 1),
    (4, 1),
    (5, 1),
    (0, 2),
    (1, 2),
    (2, 2),
    (3, 2),
];

fn edge_between(a: usize, b: usize) -> usize {
    let (lo, hi) = (a.min(b), a.max(b));
    let axis = (hi ^ lo).trailing_zeros() as usize;
    EDGES
        .iter()
        .position(|&(c, ax)| c == lo && ax == axis)
        .expect("corners share an edge")
}

fn edge_midpoint(e: usize) -> Vector3<f64> {
    let (c, axis) = EDGES[e];
    let mut p = corner(c).map(|v| v as f64);
    p[axis] += 0.5;
    Vector3::from(p)
}

/// Oriented boundary loops (as edge ids) for each of the 256 corner states.
fn case_table() -> &'static [Vec<Vec<u8>>] {
    static TABLE: OnceLock<Vec<Vec<Vec<u8>>>> = OnceLock::new();
    TABLE.get_or_init(|| (0..256).map(build_case).collect())
}

fn build_case(mask: usize) -> Vec<Vec<u8>> {
    let inside = |c: usize| mask & (1 << c) != 0;
    let mut next: [Option<usize>; 12] = [None; 12];
    for axis in 0..3 {
        for side in 0..2 {
            let (u, v) = ((axis + 1) % 3, (axis + 2) % 3);
            let base = side << axis;
            let ring = [base, base | 1 << u, base | 1 << u | 1 << v, base | 1 << v];
            let mut normal = Vector3::zeros();
            normal[axis] = if side == 1 { 1.0 } else { -1.0 };
            let n_in = ring.iter().filter(|&&c| inside(c)).count();
            let mut segments: Vec<(usize, usize, usize)> = Vec::new();
            if n_in == 2 && inside(ring[0]) == inside(ring[2]) {
                // Diagonal: cut each inside corner off on its own.
                for i in 0..4 {
                    if inside(ring[i]) {
                        let a = edge_between(ring[(i + 3) % 4], ring[i]);
                        let b = edge_between(ring[i], ring[(i + 1) % 4]);
                        segments.push((a, b, ring[i]));
                    }
                }
            } else if n_in != 0 && n_in != 4 {
                let crossings: Vec<usize> = (0..4)
                    .filter(|&i| inside(ring[i]) != inside(ring[(i + 1) % 4]))
                    .map(|i| edge_between(ring[i], ring[(i + 1) % 4]))
                    .collect();
                let s = *ring.iter().find(|&&c| inside(c)).unwrap();
                segments.push((crossings[0], crossings[1], s));
            }
            for (a, b, s) in segments {
                let pa = edge_midpoint(a);
                let pb = edge_midpoint(b);
                let ps = Vector3::from(corner(s).map(|v| v as f64));
                let (from, to) = if (pb - pa).cross(&(ps - pa)).dot(&normal) < 0.0 {
                    (a, b)
                } else {
                    (b, a)
                };
                assert!(next[from].is_none(), "case {mask}: edge {from} leaves twice");
                next[from] = Some(to);
            }
        }
    }
    let mut loops = Vec::new();
    let mut used = [false; 12];
    for start in 0..12 {
        if used[start] || next[start].is_none() {
            continue;
        }
        let mut lp = Vec::new();
        let mut e = start;
        while !used[e] {
            used[e] = true;
            lp.push(e as u8);
            e = next[e].expect("closed loop");
        }
        assert_eq!(e, start, "case {mask}: loop does not close");
        loops.push(lp);
    }
    loops
}

/// Regular lattice of scalar samples.
pub struct SampledField<'a> {
    pub dims: [usize; 3],
    pub origin: Point3<f64>,
    pub spacing: f64,
    pub value: &'a (dyn Fn(usize, usize, usize) -> f64 + Sync),
}

/// Marching cubes at `iso`; samples above `iso` are inside. The lattice is
/// implicitly surrounded by one layer of outside samples, so the result is
/// closed even when inside samples touch the lattice boundary.
pub fn marching_cubes(field: &SampledField<'_>, iso: f64) -> TriangleMesh {
    let [nx, ny, nz] = field.dims;
    let (ex, ey) = (nx + 2, ny + 2);
    let sample = |i: i64, j: i64, k: i64| -> f64 {
        if i < 0 || j < 0 || k < 0 || i >= nx as i64 || j >= ny as i64 || k >= nz as i64 {
            f64::NEG_INFINITY
        } else {
            (field.value)(i as usize, j as usize, k as usize)
        }
    };
    let position = |i: i64, j: i64, k: i64| field.origin + field.spacing * Vector3::new(i as f64, j as f64, k as f64);
    let table = case_table();
    let mut vertex_of: HashMap<u64, u32> = HashMap::new();
    let mut vertices: Vec<Point3<f64>> = Vec::new();
    let mut triangles: Vec<[u32; 3]> = Vec::new();

    // Slabs of samples for the current and next z layer.
    let layer = |k: i64| -> Vec<f64> {
        let mut v = Vec::with_capacity(ex * ey);
        for j in -1..=ny as i64 {
            for i in -1..=nx as i64 {
                v.push(sample(i, j, k));
            }
        }
        v
    };
    let mut lower = layer(-1);
    for k in -1..nz as i64 {
        let upper = layer(k + 1);
        for j in -1..ny as i64 {
            for i in -1..nx as i64 {
                let mut vals = [0.0; 8];
                let mut mask = 0usize;
                for (c, val) in vals.iter_mut().enumerate() {
                    let [di, dj, dk] = corner(c);
                    let slab = if dk == 0 { &lower } else { &upper };
                    *val = slab[(j + 1 + dj as i64) as usize * ex + (i + 1 + di as i64) as usize];
                    if *val > iso {
                        mask |= 1 << c;
                    }
                }
                if mask == 0 || mask == 255 {
                    continue;
                }
                let mut ids = [u32::MAX; 12];
                for lp in &table[mask] {
                    for &e in lp {
                        let e = e as usize;
                        let (c, axis) = EDGES[e];
                        let [di, dj, dk] = corner(c);
                        let (li, lj, lk) = (i + di as i64, j + dj as i64, k + dk as i64);
                        let key = ((((lk + 1) as u64 * ey as u64 + (lj + 1) as u64) * ex as u64) + (li + 1) as u64) * 3
                            + axis as u64;
                        ids[e] = *vertex_of.entry(key).or_insert_with(|| {
                            let hi = c | 1 << axis;
                            let (va, vb) = (vals[c], vals[hi]);
                            let t = if va.is_finite() && vb.is_finite() {
                                ((iso - va) / (vb - va)).clamp(1e-3, 1.0 - 1e-3)
                            } else if va.is_finite() {
                                // Outside the lattice: place the surface half a step out.
                                0.5
                            } else {
                                0.5
                            };
                            let a = position(li, lj, lk);
                            let mut d = Vector3::zeros();
                            d[axis] = field.spacing;
                            vertices.push(a + t * d);
                            (vertices.len() - 1) as u32
                        });
                    }
                    for w in 1..lp.len() - 1 {
                        triangles.push([ids[lp[0] as usize], ids[lp[w] as usize], ids[lp[w + 1] as usize]]);
                    }
                }
            }
        }
        lower = upper;
    }
    TriangleMesh::new(vertices, triangles).expect("marching cubes emits valid indices")
}

/// Closed surface of the solid cells (iso-level 0.5 over cell-centre samples),
/// followed by `smoothing_iters` rounds of volume-preserving Laplacian smoothing.
pub fn extract_surface(grid: &VoxelGrid, smoothing_iters: usize) -> Result<TriangleMesh, GeometryError> {
    if grid.solid_count() == 0 {
        return Err(GeometryError::EmptyGrid);
    }
    let h = grid.voxel_size();
    let value = |i: usize, j: usize, k: usize| if grid.is_solid(grid.index(i, j, k)) { 1.0 } else { 0.0 };
    let field = SampledField {
        dims: grid.dims(),
        origin: grid.origin() + Vector3::repeat(0.5 * h),
        spacing: h,
        value: &value,
    };
    let mesh = marching_cubes(&field, 0.5);
    Ok(smooth(&mesh, smoothing_iters))
}

/// Taubin smoothing: each iteration is a shrinking Laplacian step followed by
/// an inflating one, which keeps volume drift small.
pub fn smooth(mesh: &TriangleMesh, iterations: usize) -> TriangleMesh {
    const LAMBDA: f64 = 0.5;
    const MU: f64 = -0.53;
    if iterations == 0 {
        return mesh.clone();
    }
    let n = mesh.vertices().len();
    let mut adjacency: Vec<Vec<u32>> = vec![Vec::new(); n];
    for tri in mesh.triangles() {
        for e in 0..3 {
            let (a, b) = (tri[e], tri[(e + 1) % 3]);
            adjacency[a as usize].push(b);
            adjacency[b as usize].push(a);
        }
    }
    for nb in &mut adjacency {
        nb.sort_unstable();
        nb.dedup();
    }
    let mut pos: Vec<Point3<f64>> = mesh.vertices().to_vec();
    let step = |pos: &[Point3<f64>], factor: f64| -> Vec<Point3<f64>> {
        pos.iter()
            .enumerate()
            .map(|(i, p)| {
                let nb = &adjacency[i];
                if nb.is_empty() {
                    return *p;
                }
                let mean = nb.iter().fold(Vector3::zeros(), |acc, &j| acc + pos[j as usize].coords) / nb.len() as f64;
                p + factor * (mean - p.coords)
            })
            .collect()
    };
    for _ in 0..iterations {
        pos = step(&pos, LAMBDA);
        pos = step(&pos, MU);
    }
    TriangleMesh::new(pos, mesh.triangles().to_vec()).expect("topology unchanged")
}
