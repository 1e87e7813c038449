use std::collections::HashMap;

use nalgebra::{Point3, Vector3};
use serde::{Deserialize, Serialize};

use super::GeometryError;

/// Indexed triangle mesh in millimetres.
///
/// Triangles are counter-clockwise when viewed from outside, so the
/// right-hand normal points away from the enclosed solid.
#[derive(Debug, Clone, PartialEq)]
pub struct TriangleMesh {
    vertices: Vec<Point3<f64>>,
    triangles: Vec<[u32; 3]>,
}

impl TriangleMesh {
    /// Builds a mesh, checking index bounds and rejecting collapsed triangles.
    pub fn new(vertices: Vec<Point3<f64>>, triangles: Vec<[u32; 3]>) -> Result<Self, GeometryError> {
        let n = vertices.len();
        for (t, tri) in triangles.iter().enumerate() {
            if tri.iter().any(|&i| i as usize >= n) {
                return Err(GeometryError::InvalidMesh(format!(
                    "triangle {t} references a vertex outside 0..{n}"
                )));
            }
            if tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2] {
                return Err(GeometryError::InvalidMesh(format!(
                    "triangle {t} repeats a vertex index"
                )));
            }
        }
        Ok(Self { vertices, triangles })
    }

    pub fn vertices(&self) -> &[Point3<f64>] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[u32; 3]] {
        &self.triangles
    }

    pub fn is_empty(&self) -> bool {
        self.triangles.is_empty()
    }

    pub fn triangle(&self, t: usize) -> [Point3<f64>; 3] {
        let [a, b, c] = self.triangles[t];
        [
            self.vertices[a as usize],
            self.vertices[b as usize],
            self.vertices[c as usize],
        ]
    }

    /// Unit normal from the winding order; zero for degenerate triangles.
    pub fn face_normal(&self, t: usize) -> Vector3<f64> {
        let [a, b, c] = self.triangle(t);
        (b - a)
            .cross(&(c - a))
            .try_normalize(0.0)
            .unwrap_or_else(Vector3::zeros)
    }

    pub fn bbox(&self) -> Option<(Point3<f64>, Point3<f64>)> {
        let first = *self.vertices.first()?;
        Some(
            self.vertices
                .iter()
                .fold((first, first), |(lo, hi), p| (lo.inf(p), hi.sup(p))),
        )
    }

    /// Uniformly scales and translates every vertex.
    pub fn transformed(&self, scale: f64, offset: Vector3<f64>) -> Self {
        Self {
            vertices: self
                .vertices
                .iter()
                .map(|p| Point3::from(p.coords * scale + offset))
                .collect(),
            triangles: self.triangles.clone(),
        }
    }

    /// Volume by the divergence theorem (sum of signed tetrahedra against the origin).
    pub fn signed_volume(&self) -> f64 {
        (0..self.triangles.len())
            .map(|t| {
                let [a, b, c] = self.triangle(t);
                a.coords.dot(&b.coords.cross(&c.coords)) / 6.0
            })
            .sum()
    }

    /// Merges vertices closer than `tol` and remaps triangles.
    ///
    /// Triangles that collapse after welding are kept out of the result, so
    /// callers that need a facet-preserving weld should check the count.
    pub fn welded(vertices: &[Point3<f64>], triangles: &[[u32; 3]], tol: f64) -> (Vec<Point3<f64>>, Vec<[u32; 3]>) {
        let mut buckets: HashMap<[i64; 3], Vec<u32>> = HashMap::new();
        let mut merged: Vec<Point3<f64>> = Vec::new();
        let mut remap = Vec::with_capacity(vertices.len());
        let key = |p: &Point3<f64>| -> [i64; 3] {
            [
                (p.x / tol).floor() as i64,
                (p.y / tol).floor() as i64,
                (p.z / tol).floor() as i64,
            ]
        };
        for p in vertices {
            let k = key(p);
            let mut found = None;
            'search: for dx in -1..=1 {
                for dy in -1..=1 {
                    for dz in -1..=1 {
                        if let Some(ids) = buckets.get(&[k[0] + dx, k[1] + dy, k[2] + dz]) {
                            for &id in ids {
                                if (merged[id as usize] - p).norm() <= tol {
                                    found = Some(id);
                                    break 'search;
                                }
                            }
                        }
                    }
                }
            }
            let id = found.unwrap_or_else(|| {
                let id = merged.len() as u32;
                merged.push(*p);
                buckets.entry(k).or_default().push(id);
                id
            });
            remap.push(id);
        }
        let tris = triangles.iter().map(|t| t.map(|i| remap[i as usize])).collect();
        (merged, tris)
    }

    pub fn diagnostics(&self) -> MeshDiagnostics {
        mesh_diagnostics(self)
    }
}

/// Summary produced by [`mesh_diagnostics`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeshDiagnostics {
    pub watertight: bool,
    pub volume_mm3: f64,
    pub bbox_min: [f64; 3],
    pub bbox_max: [f64; 3],
    /// Number of connected shells (vertex-connected triangle groups).
    pub shells: usize,
    /// Total genus over all shells; `None` unless watertight.
    pub genus: Option<i64>,
    pub euler_characteristic: i64,
}

/// Edge-manifold census, signed volume and Euler-characteristic genus.
pub fn mesh_diagnostics(mesh: &TriangleMesh) -> MeshDiagnostics {
    let (lo, hi) = mesh.bbox().unwrap_or((Point3::origin(), Point3::origin()));

    // Each directed edge must occur once and be matched by its reverse.
    let mut directed: HashMap<(u32, u32), u32> = HashMap::with_capacity(mesh.triangles.len() * 3);
    for tri in &mesh.triangles {
        for e in 0..3 {
            *directed.entry((tri[e], tri[(e + 1) % 3])).or_default() += 1;
        }
    }
    let watertight = !mesh.triangles.is_empty()
        && directed
            .iter()
            .all(|(&(a, b), &n)| n == 1 && directed.get(&(b, a)) == Some(&1));

    let used = {
        let mut used = vec![false; mesh.vertices.len()];
        for tri in &mesh.triangles {
            for &i in tri {
                used[i as usize] = true;
            }
        }
        used
    };
    let v = used.iter().filter(|&&u| u).count() as i64;
    let mut undirected: Vec<(u32, u32)> = directed.keys().map(|&(a, b)| (a.min(b), a.max(b))).collect();
    undirected.sort_unstable();
    undirected.dedup();
    let e = undirected.len() as i64;
    let f = mesh.triangles.len() as i64;
    let chi = v - e + f;

    let shells = count_shells(mesh, &used);
    let genus = watertight.then(|| (2 * shells as i64 - chi) / 2);
    let volume_mm3 = if watertight { mesh.signed_volume() } else { 0.0 };

    MeshDiagnostics {
        watertight,
        volume_mm3,
        bbox_min: [lo.x, lo.y, lo.z],
        bbox_max: [hi.x, hi.y, hi.z],
        shells,
        genus,
        euler_characteristic: chi,
    }
}

fn count_shells(mesh: &TriangleMesh, used: &[bool]) -> usize {
    let mut parent: Vec<u32> = (0..mesh.vertices.len() as u32).collect();
    fn find(parent: &mut [u32], mut x: u32) -> u32 {
        while parent[x as usize] != x {
            parent[x as usize] = parent[parent[x as usize] as usize];
            x = parent[x as usize];
        }
        x
    }
    for tri in &mesh.triangles {
        let r0 = find(&mut parent, tri[0]);
        for &i in &tri[1..] {
            let r = find(&mut parent, i);
            if r != r0 {
                parent[r as usize] = r0;
            }
        }
    }
    (0..mesh.vertices.len() as u32)
        .filter(|&i| used[i as usize] && find(&mut parent, i) == i)
        .count()
}

#[cfg(test)]
pub(crate) mod fixtures {
    use super::*;

    /// Axis-aligned box with outward winding.
    pub fn cuboid(min: [f64; 3], max: [f64; 3]) -> TriangleMesh {
        let v = |i: usize| {
            Point3::new(
                if i & 1 == 0 { min[0] } else { max[0] },
                if i & 2 == 0 { min[1] } else { max[1] },
                if i & 4 == 0 { min[2] } else { max[2] },
            )
        };
        let vertices = (0..8).map(v).collect();
        let quads = [
            [0, 2, 3, 1], // -z
            [4, 5, 7, 6], // +z
            [0, 1, 5, 4], // -y
            [2, 6, 7, 3], // +y
            [0, 4, 6, 2], // -x
            [1, 3, 7, 5], // +x
        ];
        let triangles = quads
            .iter()
            .flat_map(|q| [[q[0], q[1], q[2]], [q[0], q[2], q[3]]])
            .collect();
        TriangleMesh::new(vertices, triangles).unwrap()
    }

    /// UV sphere with `rings` latitude bands and `segments` longitude slices.
    pub fn uv_sphere(center: [f64; 3], radius: f64, rings: u32, segments: u32) -> TriangleMesh {
        let c = Vector3::from(center);
        let mut vertices = vec![Point3::from(c + Vector3::new(0.0, 0.0, radius))];
        for r in 1..rings {
            let theta = std::f64::consts::PI * r as f64 / rings as f64;
            for s in 0..segments {
                let phi = std::f64::consts::TAU * s as f64 / segments as f64;
                vertices.push(Point3::from(
                    c + radius * Vector3::new(theta.sin() * phi.cos(), theta.sin() * phi.sin(), theta.cos()),
                ));
            }
        }
        let south = vertices.len() as u32;
        vertices.push(Point3::from(c - Vector3::new(0.0, 0.0, radius)));
        let ring = |r: u32, s: u32| 1 + (r - 1) * segments + s % segments;
        let mut triangles = Vec::new();
        for s in 0..segments {
            triangles.push([0, ring(1, s), ring(1, s + 1)]);
            triangles.push([south, ring(rings - 1, s + 1), ring(rings - 1, s)]);
        }
        for r in 1..rings - 1 {
            for s in 0..segments {
                let (a, b) = (ring(r, s), ring(r, s + 1));
                let (c2, d) = (ring(r + 1, s), ring(r + 1, s + 1));
                triangles.push([a, c2, d]);
                triangles.push([a, d, b]);
            }
        }
        TriangleMesh::new(vertices, triangles).unwrap()
    }

    /// Torus around the z axis.
    pub fn torus(major: f64, minor: f64, nu: u32, nv: u32) -> TriangleMesh {
        let mut vertices = Vec::new();
        for i in 0..nu {
            let u = std::f64::consts::TAU * i as f64 / nu as f64;
            for j in 0..nv {
                let v = std::f64::consts::TAU * j as f64 / nv as f64;
                let rr = major + minor * v.cos();
                vertices.push(Point3::new(rr * u.cos(), rr * u.sin(), minor * v.sin()));
            }
        }
        let id = |i: u32, j: u32| (i % nu) * nv + j % nv;
        let mut triangles = Vec::new();
        for i in 0..nu {
            for j in 0..nv {
                let (a, b, c, d) = (id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1));
                triangles.push([a, b, c]);
                triangles.push([a, c, d]);
            }
        }
        TriangleMesh::new(vertices, triangles).unwrap()
    }
}

#[cfg(test)]
mod tests {
    use super::fixtures::*;
    use super::*;

    #[test]
    fn rejects_out_of_range_and_repeated_indices() {
        let v = vec![Point3::origin(), Point3::new(1.0, 0.0, 0.0), Point3::new(0.0, 1.0, 0.0)];
        assert!(TriangleMesh::new(v.clone(), vec![[0, 1, 3]]).is_err());
        assert!(TriangleMesh::new(v, vec![[0, 1, 1]]).is_err());
    }

    #[test]
    fn cube_diagnostics() {
        let d = cuboid([0.0; 3], [10.0; 3]).diagnostics();
        assert!(d.watertight);
        assert!((d.volume_mm3 - 1000.0).abs() < 1e-9);
        assert_eq!(d.genus, Some(0));
        assert_eq!(d.shells, 1);
        assert_eq!(d.bbox_max, [10.0; 3]);
    }

    #[test]
    fn open_triangle_is_not_watertight() {
        let m = TriangleMesh::new(
            vec![Point3::origin(), Point3::new(1.0, 0.0, 0.0), Point3::new(0.0, 1.0, 0.0)],
            vec![[0, 1, 2]],
        )
        .unwrap();
        let d = m.diagnostics();
        assert!(!d.watertight);
        assert_eq!(d.volume_mm3, 0.0);
        assert_eq!(d.genus, None);
    }

    #[test]
    fn torus_has_genus_one() {
        let d = torus(10.0, 3.0, 24, 12).diagnostics();
        assert!(d.watertight);
        assert_eq!(d.euler_characteristic, 0);
        assert_eq!(d.genus, Some(1));
    }

    #[test]
    fn flipped_triangle_breaks_watertightness() {
        let m = cuboid([0.0; 3], [1.0; 3]);
        let mut tris = m.triangles().to_vec();
        tris[0].swap(1, 2);
        let flipped = TriangleMesh::new(m.vertices().to_vec(), tris).unwrap();
        assert!(!flipped.diagnostics().watertight);
    }

    #[test]
    fn two_shells_have_zero_total_genus() {
        let a = cuboid([0.0; 3], [1.0; 3]);
        let b = cuboid([5.0; 3], [6.0; 3]);
        let mut v = a.vertices().to_vec();
        v.extend_from_slice(b.vertices());
        let mut t = a.triangles().to_vec();
        t.extend(b.triangles().iter().map(|tri| tri.map(|i| i + 8)));
        let d = TriangleMesh::new(v, t).unwrap().diagnostics();
        assert_eq!(d.shells, 2);
        assert_eq!(d.genus, Some(0));
    }

    #[test]
    fn sphere_volume_converges() {
        let d = uv_sphere([0.0; 3], 5.0, 64, 128).diagnostics();
        let exact = 4.0 / 3.0 * std::f64::consts::PI * 125.0;
        assert!(d.watertight);
        assert!((d.volume_mm3 - exact).abs() / exact < 0.01);
    }
}
