//! Channel carving, port opening, printability analysis and export.

mod carve;
mod ports;
mod report;

use thiserror::Error;

use crate::geometry::GeometryError;
use crate::router::Violation;

pub use carve::{carve, export_printable, CarveOptions, CarveRecord, CarvedModel};
pub use ports::{count_openings, open_ports, open_ports_with};
pub use report::{
    contour_metrics, printability_check, PrintabilityReport, Section, SliceReport, TangentSample, Thresholds,
    DEFAULT_MAX_ANGLE_DEG, DEFAULT_MIN_CIRCULARITY,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CarveError {
    #[error("path is not valid against the grid: {} violation(s), first {:?}", .0.len(), .0.first())]
    InvalidPath(Vec<Violation>),
    #[error("path has no voxels")]
    EmptyPath,
    #[error("carving splits the solid into {after} components (was {before})")]
    Disconnected { before: usize, after: usize },
    #[error("port shaft below path position {position} leaves the solid at z layer {layer} before reaching the base")]
    Port { position: usize, layer: usize },
    #[error("ports are already open")]
    PortsAlreadyOpen,
    #[error("carved model is inconsistent: {0}")]
    Inconsistent(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}
