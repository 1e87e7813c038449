//! Pipeline stages shared by the command line and the HTTP service. Every
//! artifact is produced here so both front ends write identical bytes.

use std::fmt::Write as _;

use channelforge::carver::{
    carve, export_printable, open_ports, printability_check, CarveOptions, CarveRecord, CarvedModel,
    PrintabilityReport, Thresholds,
};
use channelforge::geometry::{
    default_voxel_size, load_mesh_with_units, voxelize, GridMeta, MeshDiagnostics, TriangleMesh, Units,
};
use channelforge::graspsim::{
    batch_run, grasp_cycle_trace, write_episode_csv, BatchSummary, ControllerConfig, CycleProtocol, GraspPlant,
};
use channelforge::router::{
    route_channel, snap_keypoints, validate_path, ChannelPath, RouteOptions, SnapOptions, ValidateOptions, Violation,
    DEFAULT_CHANNEL_RADIUS_MM,
};
use channelforge::sigproc::{
    box_stats, cycle_stats, ingest_csv, remove_drift, segment_cycles, write_csv, write_plot_csv, BoxStats, DriftMethod,
    DriftOptions,
};
use channelforge::{Connectivity, VoxelGrid};
use nalgebra::Point3;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{AppError, AppResult};
use crate::store::{json_bytes, Project, Stage};

/// Interior bias used when a request does not set one. Strong enough to keep
/// the demo channel away from the thin branch walls.
pub const DEFAULT_INTERIOR_BIAS: f64 = 4.0;
pub const DEFAULT_SMOOTHING: usize = 3;

fn config<T: Serialize>(value: &T) -> Value {
    serde_json::to_value(value).expect("settings serialise to JSON")
}

fn csv_bytes<E: std::fmt::Display>(result: Result<(), E>, buf: Vec<u8>) -> AppResult<Vec<u8>> {
    result.map_err(|e| AppError::Internal(format!("writing CSV: {e}")))?;
    Ok(buf)
}

fn finite_positive(name: &str, v: f64) -> AppResult<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(AppError::Invalid(format!("{name} must be a positive number, got {v}")))
    }
}

// Geometry stages

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MeshSettings {
    pub units: Units,
}

/// Parses an uploaded STL and rejects meshes that cannot be voxelised.
pub fn parse_mesh(bytes: &[u8], units: Units) -> AppResult<(TriangleMesh, MeshDiagnostics)> {
    let mesh = load_mesh_with_units(bytes, units)?;
    let diagnostics = mesh.diagnostics();
    if !diagnostics.watertight {
        return Err(AppError::Invalid(
            channelforge::GeometryError::NotWatertight.to_string(),
        ));
    }
    Ok((mesh, diagnostics))
}

pub fn import_mesh(project: &mut Project, bytes: &[u8], settings: MeshSettings) -> AppResult<MeshDiagnostics> {
    let (_, diagnostics) = parse_mesh(bytes, settings.units)?;
    project.publish(Stage::Mesh, &[("input.stl", bytes)], config(&settings))?;
    Ok(diagnostics)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VoxelizeSettings {
    /// `None` picks a size giving 128 cells along the longest axis.
    pub voxel_size_mm: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VoxelizeSummary {
    pub meta: GridMeta,
    pub solid_voxels: usize,
}

pub fn run_voxelize(project: &mut Project, settings: VoxelizeSettings) -> AppResult<VoxelizeSummary> {
    let bytes = project.read(Stage::Mesh, "input.stl")?;
    let mesh_settings: MeshSettings = stage_config(project, Stage::Mesh)?;
    let (mesh, _) = parse_mesh(&bytes, mesh_settings.units)?;
    let h = match settings.voxel_size_mm {
        Some(h) => {
            finite_positive("voxel_size_mm", h)?;
            h
        }
        None => default_voxel_size(&mesh),
    };
    let grid = voxelize(&mesh, h)?;
    let meta = grid.meta();
    let resolved = VoxelizeSettings { voxel_size_mm: Some(h) };
    project.publish(
        Stage::Grid,
        &[("grid.json", &json_bytes(&meta)?), ("grid.raw", &grid.to_raw())],
        config(&resolved),
    )?;
    Ok(VoxelizeSummary {
        meta,
        solid_voxels: grid.solid_count(),
    })
}

fn stage_config<T: for<'de> Deserialize<'de>>(project: &Project, stage: Stage) -> AppResult<T> {
    project.require(stage)?;
    let v = project.manifest().stages[&stage].config.clone();
    serde_json::from_value(v).map_err(|e| AppError::Internal(format!("{} settings in manifest: {e}", stage.name())))
}

pub fn load_grid(project: &Project) -> AppResult<VoxelGrid> {
    let meta: GridMeta = parse_json(&project.read(Stage::Grid, "grid.json")?, "grid.json")?;
    let raw = project.read(Stage::Grid, "grid.raw")?;
    VoxelGrid::from_raw(&meta, &raw).map_err(|e| AppError::Internal(format!("grid.raw: {e}")))
}

fn parse_json<T: for<'de> Deserialize<'de>>(bytes: &[u8], what: &str) -> AppResult<T> {
    serde_json::from_slice(bytes).map_err(|e| AppError::Internal(format!("{what}: {e}")))
}

// Routing

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RouteSettings {
    pub channel_radius_mm: f64,
    pub interior_bias: f64,
    pub connectivity: Connectivity,
    /// Blocking dilation in voxels; `None` derives it from the radius.
    pub clearance_voxels: Option<usize>,
    pub centerline_only: bool,
}

impl Default for RouteSettings {
    fn default() -> Self {
        Self {
            channel_radius_mm: DEFAULT_CHANNEL_RADIUS_MM,
            interior_bias: DEFAULT_INTERIOR_BIAS,
            connectivity: Connectivity::TwentySix,
            clearance_voxels: None,
            centerline_only: false,
        }
    }
}

impl RouteSettings {
    pub fn options(&self) -> RouteOptions {
        RouteOptions {
            radius_mm: self.channel_radius_mm,
            interior_bias: self.interior_bias,
            connectivity: self.connectivity,
            clearance_voxels: self.clearance_voxels,
            centerline_only: self.centerline_only,
        }
    }
}

/// Keypoints file and route request body. The stored copy is always in mm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RouteRequest {
    pub keypoints: Vec<[f64; 3]>,
    #[serde(default)]
    pub units: Units,
    #[serde(default)]
    pub options: RouteSettings,
}

impl RouteRequest {
    pub fn from_points(points: &[Point3<f64>], options: RouteSettings) -> Self {
        Self {
            keypoints: points.iter().map(|p| [p.x, p.y, p.z]).collect(),
            units: Units::Mm,
            options,
        }
    }

    pub fn parse(bytes: &[u8]) -> AppResult<Self> {
        serde_json::from_slice(bytes).map_err(|e| AppError::Invalid(format!("invalid route request: {e}")))
    }

    /// Converts keypoints to mm.
    pub fn canonical(&self) -> Self {
        let s = self.units.to_mm();
        Self {
            keypoints: self.keypoints.iter().map(|p| p.map(|c| c * s)).collect(),
            units: Units::Mm,
            options: self.options,
        }
    }
}

/// Routed centre line with its world-space polyline and validation result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathDocument {
    pub path: ChannelPath,
    /// Voxel centres in mm, in path order.
    pub polyline: Vec<[f64; 3]>,
    pub violations: Vec<Violation>,
}

pub fn route(grid: &VoxelGrid, request: &RouteRequest) -> AppResult<PathDocument> {
    let o = &request.options;
    finite_positive("channel_radius_mm", o.channel_radius_mm)?;
    if !(o.interior_bias.is_finite() && o.interior_bias >= 0.0) {
        return Err(AppError::Invalid(format!(
            "interior_bias must be non-negative, got {}",
            o.interior_bias
        )));
    }
    if request.keypoints.len() < 2 {
        return Err(AppError::Invalid(format!(
            "at least 2 keypoints are required, got {}",
            request.keypoints.len()
        )));
    }
    let req = request.canonical();
    let points: Vec<Point3<f64>> = req.keypoints.iter().map(|p| Point3::from(*p)).collect();
    let keypoints = snap_keypoints(grid, &points, &SnapOptions::default())?;
    let path = route_channel(grid, &keypoints, &o.options())?;
    let violations = validate_path(&path, grid, &ValidateOptions::default());
    Ok(PathDocument {
        polyline: path.polyline(grid),
        path,
        violations,
    })
}

/// Wavefront OBJ polyline, for viewing in mesh tools.
pub fn polyline_obj(polyline: &[[f64; 3]]) -> Vec<u8> {
    let mut s = String::from("# channel centre line (mm)\n");
    for p in polyline {
        let _ = writeln!(s, "v {} {} {}", p[0], p[1], p[2]);
    }
    if polyline.len() > 1 {
        s.push('l');
        for i in 1..=polyline.len() {
            let _ = write!(s, " {i}");
        }
        s.push('\n');
    }
    s.into_bytes()
}

pub fn run_route(project: &mut Project, request: &RouteRequest) -> AppResult<PathDocument> {
    let grid = load_grid(project)?;
    let doc = route(&grid, request)?;
    let canonical = request.canonical();
    project.publish(
        Stage::Path,
        &[
            ("keypoints.json", &json_bytes(&canonical)?),
            ("path.json", &json_bytes(&doc)?),
            ("path.obj", &polyline_obj(&doc.polyline)),
        ],
        config(&canonical.options),
    )?;
    Ok(doc)
}

pub fn load_path(project: &Project) -> AppResult<PathDocument> {
    parse_json(&project.read(Stage::Path, "path.json")?, "path.json")
}

// Carving, checking and export

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CarveSettings {
    pub radius_multiplier: f64,
    pub min_wall_voxels: u32,
}

impl Default for CarveSettings {
    fn default() -> Self {
        let d = CarveOptions::default();
        Self {
            radius_multiplier: d.radius_multiplier,
            min_wall_voxels: d.min_wall_voxels,
        }
    }
}

/// Carves the tube and opens both ports through the base.
pub fn carve_model(grid: &VoxelGrid, path: &ChannelPath, settings: CarveSettings) -> AppResult<CarvedModel> {
    finite_positive("radius_multiplier", settings.radius_multiplier)?;
    let opts = CarveOptions {
        radius_multiplier: settings.radius_multiplier,
        min_wall_voxels: settings.min_wall_voxels,
    };
    let carved = carve(grid, path, &opts)?;
    Ok(open_ports(&carved)?)
}

pub fn run_carve(project: &mut Project, settings: CarveSettings) -> AppResult<CarvedModel> {
    let grid = load_grid(project)?;
    let doc = load_path(project)?;
    let model = carve_model(&grid, &doc.path, settings)?;
    project.publish(
        Stage::Carved,
        &[("carved.json", &json_bytes(&model.record())?)],
        config(&settings),
    )?;
    Ok(model)
}

/// Rebuilds the carved model from the stored grid and carve record.
pub fn load_carved(project: &Project) -> AppResult<CarvedModel> {
    let mut grid = load_grid(project)?;
    let record: CarveRecord = parse_json(&project.read(Stage::Carved, "carved.json")?, "carved.json")?;
    for &v in record.channel_voxels.iter().chain(&record.port_voxels) {
        if v >= grid.len() {
            return Err(AppError::Internal(format!(
                "carved.json refers to voxel {v} outside the grid"
            )));
        }
        grid.set(v, false);
    }
    Ok(CarvedModel::from_record(grid, record)?)
}

pub fn run_check(project: &mut Project, thresholds: Thresholds) -> AppResult<PrintabilityReport> {
    finite_positive("min_circularity", thresholds.min_circularity)?;
    finite_positive("max_angle_deg", thresholds.max_angle_deg)?;
    let model = load_carved(project)?;
    let report = printability_check(&model, &thresholds);
    project.publish(
        Stage::Report,
        &[("report.json", &json_bytes(&report)?)],
        config(&thresholds),
    )?;
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExportSettings {
    /// Laplacian smoothing passes over the extracted surface.
    pub smoothing: usize,
}

impl Default for ExportSettings {
    fn default() -> Self {
        Self {
            smoothing: DEFAULT_SMOOTHING,
        }
    }
}

pub fn run_export(project: &mut Project, settings: ExportSettings) -> AppResult<MeshDiagnostics> {
    let model = load_carved(project)?;
    project.require(Stage::Report)?;
    let mesh = export_printable(&model, settings.smoothing)?;
    let bytes = channelforge::geometry::write_binary_stl(&mesh);
    project.publish(Stage::Export, &[("carved.stl", &bytes)], config(&settings))?;
    Ok(mesh.diagnostics())
}

/// Settings for the combined carve, check and export step of the service.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FinishRequest {
    pub radius_multiplier: f64,
    pub min_wall_voxels: u32,
    pub min_circularity: f64,
    pub max_angle_deg: f64,
    pub smoothing: usize,
}

impl Default for FinishRequest {
    fn default() -> Self {
        let (c, t, e) = (
            CarveSettings::default(),
            Thresholds::default(),
            ExportSettings::default(),
        );
        Self {
            radius_multiplier: c.radius_multiplier,
            min_wall_voxels: c.min_wall_voxels,
            min_circularity: t.min_circularity,
            max_angle_deg: t.max_angle_deg,
            smoothing: e.smoothing,
        }
    }
}

impl FinishRequest {
    pub fn carve(&self) -> CarveSettings {
        CarveSettings {
            radius_multiplier: self.radius_multiplier,
            min_wall_voxels: self.min_wall_voxels,
        }
    }

    pub fn thresholds(&self) -> Thresholds {
        Thresholds {
            min_circularity: self.min_circularity,
            max_angle_deg: self.max_angle_deg,
        }
    }

    pub fn export(&self) -> ExportSettings {
        ExportSettings {
            smoothing: self.smoothing,
        }
    }
}

pub fn run_finish(project: &mut Project, request: FinishRequest) -> AppResult<PrintabilityReport> {
    run_carve(project, request.carve())?;
    let report = run_check(project, request.thresholds())?;
    run_export(project, request.export())?;
    Ok(report)
}

// Trace analysis and grasp simulation. These write plain output
// directories, not projects.

/// Named output file.
pub type Artifact = (String, Vec<u8>);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnalyzeSettings {
    pub method: DriftMethod,
    pub drift: DriftOptions,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalyzeReport {
    pub settings: AnalyzeSettings,
    pub samples: usize,
    pub sample_rate_hz: f64,
    pub cycles: usize,
    pub mean_peak_ohm: f64,
    pub sd_peak_ohm: f64,
    pub peaks_ohm: Vec<f64>,
    pub peak_box: BoxStats,
}

/// Drift correction and cycle statistics of a `t_s,ohms[,force_n]` CSV.
/// Produces `corrected.csv`, `stats.json` and `cycle_plot.csv`.
pub fn analyze(csv: &[u8], settings: AnalyzeSettings) -> AppResult<(AnalyzeReport, Vec<Artifact>)> {
    let trace = ingest_csv(csv)?;
    let corrected = remove_drift(&trace, settings.method, &settings.drift)?;
    let windows = segment_cycles(&corrected, settings.drift.period_s)?;
    let stats = cycle_stats(&windows)?;
    let report = AnalyzeReport {
        settings,
        samples: trace.len(),
        sample_rate_hz: trace.sample_rate_hz,
        cycles: stats.cycle_count,
        mean_peak_ohm: stats.mean_peak_ohm,
        sd_peak_ohm: stats.sd_peak_ohm,
        peak_box: box_stats(&stats.peaks_ohm)?,
        peaks_ohm: stats.peaks_ohm.clone(),
    };
    let mut corrected_csv = Vec::new();
    let r = write_csv(&corrected, &mut corrected_csv);
    let corrected_csv = csv_bytes(r, corrected_csv)?;
    let mut plot = Vec::new();
    let r = write_plot_csv(&stats, trace.sample_rate_hz, &mut plot);
    let plot = csv_bytes(r, plot)?;
    let files = vec![
        ("corrected.csv".to_string(), corrected_csv),
        ("stats.json".to_string(), json_bytes(&report)?),
        ("cycle_plot.csv".to_string(), plot),
    ];
    Ok((report, files))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulateSettings {
    pub episodes: usize,
    pub seed: u64,
    pub controller: ControllerConfig,
    /// Cycles of the fixed-closure grasp protocol to simulate; 0 skips it.
    pub grasp_cycles: usize,
}

/// Seeded batch of controller episodes on `plant`. Produces `batch.json`,
/// one `episode_NNN.csv` per episode and, when requested, `grasp_trace.csv`.
pub fn simulate(plant: &GraspPlant, settings: &SimulateSettings) -> AppResult<(BatchSummary, Vec<Artifact>)> {
    let batch = batch_run(plant, &settings.controller, settings.episodes, settings.seed)?;
    let summary = batch.summary(&settings.controller);
    let mut files = vec![("batch.json".to_string(), json_bytes(&summary)?)];
    for (i, ep) in batch.episodes.iter().enumerate() {
        let mut buf = Vec::new();
        let r = write_episode_csv(ep, &mut buf);
        files.push((format!("episode_{i:03}.csv"), csv_bytes(r, buf)?));
    }
    if settings.grasp_cycles > 0 {
        let protocol = CycleProtocol {
            cycles: settings.grasp_cycles,
            ..CycleProtocol::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(settings.seed);
        let trace = grasp_cycle_trace(plant, &protocol, &mut rng)?;
        let mut buf = Vec::new();
        let r = write_csv(&trace, &mut buf);
        files.push(("grasp_trace.csv".to_string(), csv_bytes(r, buf)?));
    }
    Ok((summary, files))
}
