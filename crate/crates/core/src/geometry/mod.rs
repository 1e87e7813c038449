//! Mesh I/O, solid voxelisation and surface extraction.

mod demo;
mod distance;
mod mesh;
mod stl;
mod surface;
mod voxel;
mod voxelize;

pub use demo::{coral_sdf, demo_base_points, demo_branch_tips, demo_coral, demo_keypoints};
pub use distance::{depth_map, exterior_region, flood_fill, label_components};
pub use mesh::{mesh_diagnostics, MeshDiagnostics, TriangleMesh};
pub use stl::{load_mesh, load_mesh_with_units, write_ascii_stl, write_binary_stl, Units, WELD_TOLERANCE_MM};
pub use surface::{extract_surface, marching_cubes, smooth, SampledField};
pub use voxel::{Connectivity, GridMeta, VoxelGrid, VoxelIndex, ALL_OFFSETS, FACE_OFFSETS};
pub use voxelize::{default_voxel_size, triangle_box_overlap, voxelize, voxelize_with, VoxelizeOptions, GRID_PADDING};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GeometryError {
    #[error("STL parse error at byte {offset}: {message}")]
    Parse { offset: usize, message: String },
    #[error("mesh has no triangles")]
    EmptyMesh,
    #[error("invalid mesh: {0}")]
    InvalidMesh(String),
    #[error("mesh is not watertight (every edge must be shared by exactly two consistently wound triangles)")]
    NotWatertight,
    #[error("grid dims {dims:?} exceed the {max}-cell limit per axis; try a voxel size of at least {suggested_voxel_size:.4} mm")]
    GridTooLarge {
        dims: [usize; 3],
        max: usize,
        suggested_voxel_size: f64,
    },
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("grid has no solid voxels")]
    EmptyGrid,
}
