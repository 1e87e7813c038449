use nalgebra::Point3;
use serde::{Deserialize, Serialize};

use super::GeometryError;

/// Neighbourhood used for graph traversal over the lattice.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(try_from = "u8", into = "u8")]
pub enum Connectivity {
    /// Face neighbours only.
    Six,
    /// Face, edge and corner neighbours.
    #[default]
    TwentySix,
}

impl Connectivity {
    pub fn offsets(self) -> &'static [[i32; 3]] {
        match self {
            Connectivity::Six => &FACE_OFFSETS,
            Connectivity::TwentySix => &ALL_OFFSETS,
        }
    }
}

impl TryFrom<u8> for Connectivity {
    type Error = String;

    fn try_from(v: u8) -> Result<Self, Self::Error> {
        match v {
            6 => Ok(Connectivity::Six),
            26 => Ok(Connectivity::TwentySix),
            other => Err(format!("connectivity must be 6 or 26, got {other}")),
        }
    }
}

impl From<Connectivity> for u8 {
    fn from(c: Connectivity) -> u8 {
        match c {
            Connectivity::Six => 6,
            Connectivity::TwentySix => 26,
        }
    }
}

pub const FACE_OFFSETS: [[i32; 3]; 6] = [[-1, 0, 0], [1, 0, 0], [0, -1, 0], [0, 1, 0], [0, 0, -1], [0, 0, 1]];

pub const ALL_OFFSETS: [[i32; 3]; 26] = {
    let mut out = [[0i32; 3]; 26];
    let mut n = 0;
    let mut dz = -1;
    while dz <= 1 {
        let mut dy = -1;
        while dy <= 1 {
            let mut dx = -1;
            while dx <= 1 {
                if !(dx == 0 && dy == 0 && dz == 0) {
                    out[n] = [dx, dy, dz];
                    n += 1;
                }
                dx += 1;
            }
            dy += 1;
        }
        dz += 1;
    }
    out
};

/// Linear cell index, x fastest.
pub type VoxelIndex = usize;

/// Dimensions, voxel size and origin of a grid; the JSON sidecar of a raw dump.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridMeta {
    pub dims: [usize; 3],
    pub voxel_size: f64,
    pub origin: [f64; 3],
}

/// Binary occupancy over a regular lattice. `true` cells are solid material.
#[derive(Clone, PartialEq)]
pub struct VoxelGrid {
    dims: [usize; 3],
    voxel_size: f64,
    origin: Point3<f64>,
    occupancy: Vec<bool>,
}

impl std::fmt::Debug for VoxelGrid {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("VoxelGrid")
            .field("dims", &self.dims)
            .field("voxel_size", &self.voxel_size)
            .field("origin", &self.origin)
            .field("solid", &self.solid_count())
            .finish()
    }
}

impl VoxelGrid {
    pub fn new(
        dims: [usize; 3],
        voxel_size: f64,
        origin: Point3<f64>,
        occupancy: Vec<bool>,
    ) -> Result<Self, GeometryError> {
        if dims.contains(&0) {
            return Err(GeometryError::InvalidGrid(format!("dims {dims:?} must all be >= 1")));
        }
        if !(voxel_size > 0.0 && voxel_size.is_finite()) {
            return Err(GeometryError::InvalidGrid(format!(
                "voxel size {voxel_size} must be positive"
            )));
        }
        let n = dims[0] * dims[1] * dims[2];
        if occupancy.len() != n {
            return Err(GeometryError::InvalidGrid(format!(
                "occupancy has {} cells, dims require {n}",
                occupancy.len()
            )));
        }
        Ok(Self {
            dims,
            voxel_size,
            origin,
            occupancy,
        })
    }

    /// All-empty grid.
    pub fn empty(dims: [usize; 3], voxel_size: f64, origin: Point3<f64>) -> Result<Self, GeometryError> {
        Self::new(dims, voxel_size, origin, vec![false; dims[0] * dims[1] * dims[2]])
    }

    /// Grid whose occupancy is given by a predicate on integer coordinates.
    pub fn from_fn(
        dims: [usize; 3],
        voxel_size: f64,
        origin: Point3<f64>,
        mut solid: impl FnMut(usize, usize, usize) -> bool,
    ) -> Result<Self, GeometryError> {
        let mut occ = Vec::with_capacity(dims[0] * dims[1] * dims[2]);
        for k in 0..dims[2] {
            for j in 0..dims[1] {
                for i in 0..dims[0] {
                    occ.push(solid(i, j, k));
                }
            }
        }
        Self::new(dims, voxel_size, origin, occ)
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn voxel_size(&self) -> f64 {
        self.voxel_size
    }

    pub fn origin(&self) -> Point3<f64> {
        self.origin
    }

    pub fn meta(&self) -> GridMeta {
        GridMeta {
            dims: self.dims,
            voxel_size: self.voxel_size,
            origin: [self.origin.x, self.origin.y, self.origin.z],
        }
    }

    pub fn len(&self) -> usize {
        self.occupancy.len()
    }

    pub fn is_empty(&self) -> bool {
        self.occupancy.is_empty()
    }

    pub fn occupancy(&self) -> &[bool] {
        &self.occupancy
    }

    pub fn is_solid(&self, idx: VoxelIndex) -> bool {
        self.occupancy[idx]
    }

    pub fn set(&mut self, idx: VoxelIndex, solid: bool) {
        self.occupancy[idx] = solid;
    }

    pub fn solid_count(&self) -> usize {
        self.occupancy.iter().filter(|&&s| s).count()
    }

    pub fn solid_indices(&self) -> impl Iterator<Item = VoxelIndex> + '_ {
        self.occupancy.iter().enumerate().filter_map(|(i, &s)| s.then_some(i))
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> VoxelIndex {
        debug_assert!(i < self.dims[0] && j < self.dims[1] && k < self.dims[2]);
        i + self.dims[0] * (j + self.dims[1] * k)
    }

    #[inline]
    pub fn coords(&self, idx: VoxelIndex) -> [usize; 3] {
        let nx = self.dims[0];
        let ny = self.dims[1];
        [idx % nx, (idx / nx) % ny, idx / (nx * ny)]
    }

    /// Index of the cell at `c + d`, if inside the grid.
    #[inline]
    pub fn offset(&self, c: [usize; 3], d: [i32; 3]) -> Option<VoxelIndex> {
        let i = c[0] as i64 + d[0] as i64;
        let j = c[1] as i64 + d[1] as i64;
        let k = c[2] as i64 + d[2] as i64;
        if i < 0 || j < 0 || k < 0 || i >= self.dims[0] as i64 || j >= self.dims[1] as i64 || k >= self.dims[2] as i64 {
            return None;
        }
        Some(self.index(i as usize, j as usize, k as usize))
    }

    /// Neighbours of `idx` under `conn`, paired with the offset used.
    pub fn neighbors(&self, idx: VoxelIndex, conn: Connectivity) -> impl Iterator<Item = (VoxelIndex, [i32; 3])> + '_ {
        let c = self.coords(idx);
        conn.offsets()
            .iter()
            .filter_map(move |&d| self.offset(c, d).map(|n| (n, d)))
    }

    /// World position (mm) of the centre of a cell.
    #[inline]
    pub fn center(&self, idx: VoxelIndex) -> Point3<f64> {
        let [i, j, k] = self.coords(idx);
        self.center_of(i, j, k)
    }

    #[inline]
    pub fn center_of(&self, i: usize, j: usize, k: usize) -> Point3<f64> {
        let h = self.voxel_size;
        Point3::new(
            self.origin.x + h * (i as f64 + 0.5),
            self.origin.y + h * (j as f64 + 0.5),
            self.origin.z + h * (k as f64 + 0.5),
        )
    }

    /// Cell containing a world point, if inside the grid.
    pub fn locate(&self, p: &Point3<f64>) -> Option<VoxelIndex> {
        let c = self.continuous_coords(p);
        if c.iter().zip(self.dims).any(|(&v, d)| v < 0.0 || v >= d as f64) {
            return None;
        }
        Some(self.index(c[0] as usize, c[1] as usize, c[2] as usize))
    }

    /// Position in cell units relative to the origin corner.
    pub fn continuous_coords(&self, p: &Point3<f64>) -> [f64; 3] {
        let h = self.voxel_size;
        [
            (p.x - self.origin.x) / h,
            (p.y - self.origin.y) / h,
            (p.z - self.origin.z) / h,
        ]
    }

    /// Lowest and highest z layer containing solid cells.
    pub fn solid_layer_range(&self) -> Option<(usize, usize)> {
        let layer = self.dims[0] * self.dims[1];
        let lo = self.occupancy.iter().position(|&s| s)? / layer;
        let hi = self.occupancy.iter().rposition(|&s| s)? / layer;
        Some((lo, hi))
    }

    /// Raw dump: one byte per cell (0 or 1), x fastest.
    pub fn to_raw(&self) -> Vec<u8> {
        self.occupancy.iter().map(|&s| s as u8).collect()
    }

    pub fn from_raw(meta: &GridMeta, raw: &[u8]) -> Result<Self, GeometryError> {
        if let Some(pos) = raw.iter().position(|&b| b > 1) {
            return Err(GeometryError::InvalidGrid(format!(
                "raw occupancy byte {pos} is {} (expected 0 or 1)",
                raw[pos]
            )));
        }
        Self::new(
            meta.dims,
            meta.voxel_size,
            Point3::from(meta.origin),
            raw.iter().map(|&b| b == 1).collect(),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn offsets_are_complete() {
        assert_eq!(ALL_OFFSETS.len(), 26);
        assert!(!ALL_OFFSETS.contains(&[0, 0, 0]));
        let mut sorted = ALL_OFFSETS.to_vec();
        sorted.sort();
        sorted.dedup();
        assert_eq!(sorted.len(), 26);
    }

    #[test]
    fn rejects_bad_construction() {
        assert!(VoxelGrid::empty([0, 1, 1], 1.0, Point3::origin()).is_err());
        assert!(VoxelGrid::empty([1, 1, 1], 0.0, Point3::origin()).is_err());
        assert!(VoxelGrid::new([2, 2, 2], 1.0, Point3::origin(), vec![true; 7]).is_err());
    }

    #[test]
    fn raw_dump_round_trip() {
        let g = VoxelGrid::from_fn([3, 4, 5], 0.5, Point3::new(1.0, 2.0, 3.0), |i, j, k| {
            (i + j + k) % 3 == 0
        })
        .unwrap();
        let meta: GridMeta = serde_json::from_str(&serde_json::to_string(&g.meta()).unwrap()).unwrap();
        assert_eq!(VoxelGrid::from_raw(&meta, &g.to_raw()).unwrap(), g);
    }

    proptest! {
        #[test]
        fn index_world_mapping_is_invertible(
            nx in 1usize..40, ny in 1usize..40, nz in 1usize..40,
            h in 0.01f64..5.0, ox in -100.0f64..100.0, seed in any::<u64>(),
        ) {
            let g = VoxelGrid::empty([nx, ny, nz], h, Point3::new(ox, -ox, 0.5 * ox)).unwrap();
            let idx = (seed as usize) % g.len();
            let [i, j, k] = g.coords(idx);
            prop_assert_eq!(g.index(i, j, k), idx);
            prop_assert_eq!(g.locate(&g.center(idx)), Some(idx));
        }
    }
}
