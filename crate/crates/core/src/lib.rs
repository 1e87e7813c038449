//! Design toolkit for 3D-printable soft sensors with an embedded liquid-metal
//! channel: mesh voxelisation, keypoint-driven channel routing, carving and
//! printability checks, plus the electrical, signal-processing and grasp
//! simulation models used to evaluate a sensor before it is printed.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod carver;
pub mod geometry;
pub mod graspsim;
pub mod router;
pub mod sensemodel;
pub mod sigproc;

pub use geometry::{Connectivity, GeometryError, TriangleMesh, VoxelGrid, VoxelIndex};
