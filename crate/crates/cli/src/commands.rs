use std::net::{Ipv4Addr, SocketAddr};
use std::path::{Path, PathBuf};

use channelforge::carver::{Thresholds, DEFAULT_MAX_ANGLE_DEG, DEFAULT_MIN_CIRCULARITY};
use channelforge::geometry::{demo_coral, demo_keypoints, write_binary_stl, Units};
use channelforge::graspsim::{ControllerConfig, GraspPlant, DEMO_NOISE_OHM};
use channelforge::router::DEFAULT_CHANNEL_RADIUS_MM;
use channelforge::sigproc::{DriftMethod, DriftOptions};
use channelforge::Connectivity;
use clap::{Args, Parser, Subcommand};

use crate::error::{AppError, AppResult};
use crate::stages::{
    self, AnalyzeSettings, Artifact, CarveSettings, ExportSettings, MeshSettings, RouteRequest, RouteSettings,
    SimulateSettings, VoxelizeSettings, DEFAULT_INTERIOR_BIAS, DEFAULT_SMOOTHING,
};
use crate::store::{write_atomic, Project};

pub const DATA_DIR_ENV: &str = "CHANNELFORGE_DATA_DIR";
const DEFAULT_OUT: &str = "channelforge-out";

#[derive(Debug, Parser)]
#[command(
    name = "channelforge",
    version,
    about = "Design, check and simulate soft sensors with routed liquid-metal channels"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Import an STL mesh and voxelise it.
    Voxelize(VoxelizeArgs),
    /// Route a channel through keypoints on the voxel grid.
    Route(RouteArgs),
    /// Carve the routed channel and open its ports.
    Carve(CarveArgs),
    /// Check the carved model for printability.
    Check(CheckArgs),
    /// Export the carved model as a printable binary STL.
    Export(ExportArgs),
    /// Remove drift from a resistance trace and summarise its cycles.
    Analyze(AnalyzeArgs),
    /// Run seeded grasp-controller episodes on a simulated plant.
    Simulate(SimulateArgs),
    /// Run voxelize, route, carve, check and export on the bundled coral.
    Demo(DemoArgs),
    /// Serve the JSON API over a directory of projects.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
pub struct OutArgs {
    /// Output directory; defaults to $CHANNELFORGE_DATA_DIR, then ./channelforge-out.
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
}

impl OutArgs {
    pub fn dir(&self) -> PathBuf {
        self.out
            .clone()
            .or_else(|| std::env::var_os(DATA_DIR_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT))
    }
}

#[derive(Debug, Args)]
pub struct VoxelizeArgs {
    #[arg(long, value_name = "FILE")]
    pub mesh: PathBuf,
    #[arg(long, default_value = "mm")]
    pub units: Units,
    /// Edge length of a voxel; by default 128 cells span the longest axis.
    #[arg(long, value_name = "MM")]
    pub voxel_size_mm: Option<f64>,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Args)]
pub struct RouteArgs {
    /// JSON file with `keypoints` (and optionally `units` and `options`).
    #[arg(long, value_name = "FILE")]
    pub keypoints: PathBuf,
    #[arg(long, value_name = "MM")]
    pub radius_mm: Option<f64>,
    #[arg(long)]
    pub interior_bias: Option<f64>,
    /// 6 or 26.
    #[arg(long, value_parser = parse_connectivity)]
    pub connectivity: Option<Connectivity>,
    /// Blocking dilation around routed segments, in voxels.
    #[arg(long, value_name = "VOXELS")]
    pub clearance: Option<usize>,
    /// Block only the routed centre line.
    #[arg(long)]
    pub centerline_only: bool,
    #[command(flatten)]
    pub out: OutArgs,
}

fn parse_connectivity(s: &str) -> Result<Connectivity, String> {
    let n: u8 = s.parse().map_err(|_| format!("expected 6 or 26, got {s:?}"))?;
    Connectivity::try_from(n)
}

#[derive(Debug, Args)]
pub struct CarveArgs {
    /// Scale applied to the channel radius to compensate for shrinkage.
    #[arg(long, default_value_t = 1.0)]
    pub radius_multiplier: f64,
    #[arg(long, default_value_t = channelforge::router::DEFAULT_MIN_WALL_VOXELS)]
    pub min_wall_voxels: u32,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Args)]
pub struct CheckArgs {
    #[arg(long, default_value_t = DEFAULT_MIN_CIRCULARITY)]
    pub min_circularity: f64,
    #[arg(long, default_value_t = DEFAULT_MAX_ANGLE_DEG)]
    pub max_angle_deg: f64,
    /// Exit with status 2 when anything is flagged.
    #[arg(long)]
    pub strict: bool,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Args)]
pub struct ExportArgs {
    /// Laplacian smoothing passes.
    #[arg(long, default_value_t = DEFAULT_SMOOTHING)]
    pub smoothing: usize,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    /// CSV with header `t_s,ohms[,force_n]`.
    #[arg(long = "in", value_name = "FILE")]
    pub input: PathBuf,
    #[arg(long, default_value = "both")]
    pub method: DriftMethod,
    /// Loading period, also the window used for baseline estimation.
    #[arg(long, default_value_t = DriftOptions::default().period_s)]
    pub period_s: f64,
    #[arg(long, default_value_t = DriftOptions::default().cutoff_hz)]
    pub cutoff_hz: f64,
    /// Remove each window's own baseline level in the linear stage.
    #[arg(long)]
    pub per_cycle: bool,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long, default_value_t = 15)]
    pub episodes: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Reading noise of the bundled plant (RMS).
    #[arg(long, value_name = "OHM", default_value_t = DEMO_NOISE_OHM)]
    pub noise_ohm: f64,
    #[arg(long, default_value_t = ControllerConfig::default().target_ohm)]
    pub target_ohm: f64,
    #[arg(long, default_value_t = ControllerConfig::default().step_mm)]
    pub step_mm: f64,
    #[arg(long, default_value_t = ControllerConfig::default().dwell_s)]
    pub dwell_s: f64,
    #[arg(long, default_value_t = ControllerConfig::default().max_closure_mm)]
    pub max_closure_mm: f64,
    /// Plant JSON to use instead of the bundled one; used as is, so
    /// `--noise-ohm` does not apply.
    #[arg(long, value_name = "FILE")]
    pub plant: Option<PathBuf>,
    /// Also simulate this many cycles of the fixed-closure grasp protocol.
    #[arg(long, default_value_t = 0)]
    pub grasp_cycles: usize,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Args)]
pub struct DemoArgs {
    #[arg(long, value_name = "MM")]
    pub voxel_size_mm: Option<f64>,
    #[arg(long, default_value_t = DEFAULT_CHANNEL_RADIUS_MM)]
    pub radius_mm: f64,
    #[arg(long, default_value_t = DEFAULT_INTERIOR_BIAS)]
    pub interior_bias: f64,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, default_value_t = 8080)]
    pub port: u16,
    /// Listen on all interfaces instead of loopback only.
    #[arg(long)]
    pub public: bool,
    /// Project root; defaults to $CHANNELFORGE_DATA_DIR, then ./channelforge-out.
    #[arg(long, value_name = "DIR")]
    pub data_dir: Option<PathBuf>,
}

/// Runs one command and returns the process exit status.
pub fn run(cli: Cli) -> anyhow::Result<u8> {
    match cli.command {
        Command::Voxelize(a) => voxelize(a)?,
        Command::Route(a) => route(a)?,
        Command::Carve(a) => carve(a)?,
        Command::Check(a) => return Ok(check(a)?),
        Command::Export(a) => export(a)?,
        Command::Analyze(a) => analyze(a)?,
        Command::Simulate(a) => simulate(a)?,
        Command::Demo(a) => demo(a)?,
        Command::Serve(a) => {
            let root = OutArgs { out: a.data_dir }.dir();
            let ip = if a.public {
                Ipv4Addr::UNSPECIFIED
            } else {
                Ipv4Addr::LOCALHOST
            };
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(crate::api::serve(SocketAddr::from((ip, a.port)), &root))?;
        }
    }
    Ok(0)
}

fn read_file(path: &Path) -> AppResult<Vec<u8>> {
    std::fs::read(path).map_err(AppError::io(format!("reading {}", path.display())))
}

fn write_outputs(dir: &Path, files: &[Artifact]) -> AppResult<()> {
    std::fs::create_dir_all(dir).map_err(AppError::io(format!("creating {}", dir.display())))?;
    for (name, bytes) in files {
        write_atomic(&dir.join(name), bytes)?;
    }
    Ok(())
}

fn voxelize(a: VoxelizeArgs) -> AppResult<()> {
    let bytes = read_file(&a.mesh)?;
    let mut project = Project::open_or_create(&a.out.dir())?;
    stages::import_mesh(&mut project, &bytes, MeshSettings { units: a.units })?;
    let s = stages::run_voxelize(
        &mut project,
        VoxelizeSettings {
            voxel_size_mm: a.voxel_size_mm,
        },
    )?;
    println!(
        "grid {:?} voxel {:.4} mm, {} solid voxels (revision {})",
        s.meta.dims,
        s.meta.voxel_size,
        s.solid_voxels,
        project.revision()
    );
    Ok(())
}

fn route(a: RouteArgs) -> AppResult<()> {
    let mut project = Project::open(&a.out.dir()).map_err(|_| AppError::MissingStage(crate::store::Stage::Grid))?;
    let mut request = RouteRequest::parse(&read_file(&a.keypoints)?)?;
    let o = &mut request.options;
    if let Some(r) = a.radius_mm {
        o.channel_radius_mm = r;
    }
    if let Some(b) = a.interior_bias {
        o.interior_bias = b;
    }
    if let Some(c) = a.connectivity {
        o.connectivity = c;
    }
    if a.clearance.is_some() {
        o.clearance_voxels = a.clearance;
    }
    o.centerline_only |= a.centerline_only;
    let doc = stages::run_route(&mut project, &request)?;
    println!(
        "path {} voxels, {:.2} mm, {} violation(s) (revision {})",
        doc.path.voxels.len(),
        doc.path.length_mm,
        doc.violations.len(),
        project.revision()
    );
    Ok(())
}

fn open_existing(out: &OutArgs, needs: crate::store::Stage) -> AppResult<Project> {
    Project::open(&out.dir()).map_err(|e| match e {
        AppError::NotFound(_) => AppError::MissingStage(needs),
        other => other,
    })
}

fn carve(a: CarveArgs) -> AppResult<()> {
    let mut project = open_existing(&a.out, crate::store::Stage::Path)?;
    let model = stages::run_carve(
        &mut project,
        CarveSettings {
            radius_multiplier: a.radius_multiplier,
            min_wall_voxels: a.min_wall_voxels,
        },
    )?;
    println!(
        "carved {} channel and {} port voxels, {} thin-wall warning(s) (revision {})",
        model.channel_voxels.len(),
        model.port_voxels.len(),
        model.wall_warnings.len(),
        project.revision()
    );
    Ok(())
}

fn check(a: CheckArgs) -> AppResult<u8> {
    let mut project = open_existing(&a.out, crate::store::Stage::Carved)?;
    let report = stages::run_check(
        &mut project,
        Thresholds {
            min_circularity: a.min_circularity,
            max_angle_deg: a.max_angle_deg,
        },
    )?;
    println!(
        "printability {}: {} flagged slice(s), {} flagged tangent sample(s) (revision {})",
        report.overall,
        report.flagged_slices,
        report.flagged_samples,
        project.revision()
    );
    Ok(if a.strict && !report.passed() { 2 } else { 0 })
}

fn export(a: ExportArgs) -> AppResult<()> {
    let mut project = open_existing(&a.out, crate::store::Stage::Report)?;
    let d = stages::run_export(&mut project, ExportSettings { smoothing: a.smoothing })?;
    println!(
        "wrote {} (watertight {}, {:.1} mm3, revision {})",
        project.dir().join("carved.stl").display(),
        d.watertight,
        d.volume_mm3,
        project.revision()
    );
    Ok(())
}

fn analyze(a: AnalyzeArgs) -> AppResult<()> {
    let settings = AnalyzeSettings {
        method: a.method,
        drift: DriftOptions {
            period_s: a.period_s,
            cutoff_hz: a.cutoff_hz,
            per_cycle: a.per_cycle,
        },
    };
    let (report, files) = stages::analyze(&read_file(&a.input)?, settings)?;
    write_outputs(&a.out.dir(), &files)?;
    println!(
        "{} cycles, mean peak {:.6} ohm, sd {:.6} ohm",
        report.cycles, report.mean_peak_ohm, report.sd_peak_ohm
    );
    Ok(())
}

fn simulate(a: SimulateArgs) -> AppResult<()> {
    let plant = match &a.plant {
        Some(path) => serde_json::from_slice(&read_file(path)?)
            .map_err(|e| AppError::Invalid(format!("invalid plant {}: {e}", path.display())))?,
        None => {
            if !(a.noise_ohm.is_finite() && a.noise_ohm >= 0.0) {
                return Err(AppError::Invalid(format!(
                    "noise must be non-negative, got {}",
                    a.noise_ohm
                )));
            }
            GraspPlant::demo().with_noise_ohm(a.noise_ohm)
        }
    };
    let settings = SimulateSettings {
        episodes: a.episodes,
        seed: a.seed,
        controller: ControllerConfig {
            target_ohm: a.target_ohm,
            step_mm: a.step_mm,
            dwell_s: a.dwell_s,
            max_closure_mm: a.max_closure_mm,
            ..ControllerConfig::default()
        },
        grasp_cycles: a.grasp_cycles,
    };
    let (summary, files) = stages::simulate(&plant, &settings)?;
    write_outputs(&a.out.dir(), &files)?;
    let b = &summary.max_reading_ohm;
    println!(
        "{}/{} reached target, max reading median {:.4} ohm, whiskers [{:.4}, {:.4}]",
        summary.target_reached, summary.episodes, b.median, b.whisker_low, b.whisker_high
    );
    Ok(())
}

fn demo(a: DemoArgs) -> AppResult<()> {
    let started = std::time::Instant::now();
    let dir = a.out.dir();
    let mut project = Project::open_or_create(&dir)?;
    let stl = write_binary_stl(&demo_coral());
    stages::import_mesh(&mut project, &stl, MeshSettings::default())?;
    let grid = stages::run_voxelize(
        &mut project,
        VoxelizeSettings {
            voxel_size_mm: a.voxel_size_mm,
        },
    )?;
    println!(
        "voxelize: grid {:?}, {} solid voxels",
        grid.meta.dims, grid.solid_voxels
    );
    let request = RouteRequest::from_points(
        &demo_keypoints(),
        RouteSettings {
            channel_radius_mm: a.radius_mm,
            interior_bias: a.interior_bias,
            ..RouteSettings::default()
        },
    );
    let doc = stages::run_route(&mut project, &request)?;
    println!("route: {} voxels, {:.2} mm", doc.path.voxels.len(), doc.path.length_mm);
    let model = stages::run_carve(&mut project, CarveSettings::default())?;
    println!(
        "carve: {} channel + {} port voxels",
        model.channel_voxels.len(),
        model.port_voxels.len()
    );
    let report = stages::run_check(&mut project, Thresholds::default())?;
    println!("check: {}", report.overall);
    stages::run_export(&mut project, ExportSettings::default())?;
    println!(
        "export: {} ({:.1} s, revision {})",
        dir.join("carved.stl").display(),
        started.elapsed().as_secs_f64(),
        project.revision()
    );
    Ok(())
}
