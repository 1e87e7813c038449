//! JSON service over project directories, backing the interactive designer.
//!
//! Mutations on one project are serialised by a per-project lock; a request
//! that finds the lock taken gets 409 rather than queueing. Reads go straight
//! to the published files, which are only ever replaced by atomic renames.

use std::collections::HashMap;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};

use axum::body::Bytes;
use axum::extract::{DefaultBodyLimit, Path as UrlPath, Query, State};
use axum::http::{header, HeaderName, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use channelforge::geometry::Units;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::{AppError, AppResult};
use crate::stages::{self, FinishRequest, MeshSettings, RouteRequest, VoxelizeSettings};
use crate::store::{Project, Stage};

/// Upload ceiling; binary STL meshes easily exceed the framework default.
pub const MAX_BODY_BYTES: usize = 256 << 20;

pub const REVISION_HEADER: HeaderName = HeaderName::from_static("x-channelforge-revision");

impl IntoResponse for AppError {
    fn into_response(self) -> Response {
        let status = match &self {
            AppError::Invalid(_) => StatusCode::BAD_REQUEST,
            AppError::NotFound(_) => StatusCode::NOT_FOUND,
            AppError::MissingStage(_) | AppError::Busy(_) => StatusCode::CONFLICT,
            AppError::Io { .. } | AppError::Internal(_) => StatusCode::INTERNAL_SERVER_ERROR,
        };
        (status, Json(json!({ "error": self.to_string() }))).into_response()
    }
}

#[derive(Clone)]
pub struct AppState {
    inner: Arc<Inner>,
}

struct Inner {
    root: PathBuf,
    next_id: AtomicU64,
    locks: Mutex<HashMap<String, Arc<tokio::sync::Mutex<()>>>>,
}

impl AppState {
    /// Serves projects under `root`, creating it if needed. New ids continue
    /// after the highest existing one.
    pub fn new(root: &Path) -> AppResult<Self> {
        std::fs::create_dir_all(root).map_err(AppError::io(format!("creating {}", root.display())))?;
        let entries = std::fs::read_dir(root).map_err(AppError::io(format!("listing {}", root.display())))?;
        let next = entries
            .filter_map(|e| e.ok())
            .filter_map(|e| u64::from_str_radix(&e.file_name().to_string_lossy(), 16).ok())
            .map(|n| n + 1)
            .max()
            .unwrap_or(1);
        Ok(Self {
            inner: Arc::new(Inner {
                root: root.to_path_buf(),
                next_id: AtomicU64::new(next),
                locks: Mutex::new(HashMap::new()),
            }),
        })
    }

    fn project_dir(&self, id: &str) -> AppResult<PathBuf> {
        let valid =
            !id.is_empty() && id.len() <= 32 && id.bytes().all(|b| b.is_ascii_alphanumeric() || b == b'-' || b == b'_');
        let dir = self.inner.root.join(id);
        if valid && dir.join(crate::store::MANIFEST).is_file() {
            Ok(dir)
        } else {
            Err(AppError::NotFound(id.to_string()))
        }
    }

    fn lock_for(&self, id: &str) -> Arc<tokio::sync::Mutex<()>> {
        let mut locks = self.inner.locks.lock().expect("lock table poisoned");
        locks.entry(id.to_string()).or_default().clone()
    }

    /// Runs `f` on the project off the async workers while holding its lock.
    async fn mutate<T, F>(&self, id: &str, f: F) -> AppResult<(u64, T)>
    where
        T: Send + 'static,
        F: FnOnce(&mut Project) -> AppResult<T> + Send + 'static,
    {
        let dir = self.project_dir(id)?;
        let _guard = self
            .lock_for(id)
            .try_lock_owned()
            .map_err(|_| AppError::Busy(id.to_string()))?;
        blocking(move || {
            let mut project = Project::open(&dir)?;
            let out = f(&mut project)?;
            Ok((project.revision(), out))
        })
        .await
    }

    async fn read(&self, id: &str, stage: Stage, file: &'static str) -> AppResult<(u64, Vec<u8>)> {
        let dir = self.project_dir(id)?;
        blocking(move || {
            let project = Project::open(&dir)?;
            Ok((project.revision(), project.read(stage, file)?))
        })
        .await
    }
}

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> AppResult<T> + Send + 'static) -> AppResult<T> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| AppError::Internal(format!("worker failed: {e}")))?
}

fn with_revision(revision: u64, status: StatusCode, body: serde_json::Value) -> Response {
    (status, [(REVISION_HEADER, HeaderValue::from(revision))], Json(body)).into_response()
}

fn raw(revision: u64, content_type: &'static str, bytes: Vec<u8>) -> Response {
    (
        [
            (REVISION_HEADER, HeaderValue::from(revision)),
            (header::CONTENT_TYPE, HeaderValue::from_static(content_type)),
        ],
        bytes,
    )
        .into_response()
}

/// Empty bodies mean "all defaults".
fn parse_body<T: for<'de> Deserialize<'de> + Default>(body: &[u8]) -> AppResult<T> {
    if body.iter().all(u8::is_ascii_whitespace) {
        return Ok(T::default());
    }
    serde_json::from_slice(body).map_err(|e| AppError::Invalid(format!("invalid request body: {e}")))
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/projects", post(create_project))
        .route("/projects/{id}", get(manifest))
        .route("/projects/{id}/voxelize", post(voxelize))
        .route("/projects/{id}/route", post(route))
        .route("/projects/{id}/carve", post(carve))
        .route("/projects/{id}/report", get(report))
        .route("/projects/{id}/path", get(path))
        .route("/projects/{id}/mesh", get(mesh))
        .layer(DefaultBodyLimit::max(MAX_BODY_BYTES))
        .with_state(state)
}

pub async fn serve(addr: SocketAddr, root: &Path) -> anyhow::Result<()> {
    let state = AppState::new(root)?;
    let listener = tokio::net::TcpListener::bind(addr).await?;
    eprintln!("serving {} on http://{}", root.display(), listener.local_addr()?);
    axum::serve(listener, router(state)).await?;
    Ok(())
}

#[derive(Debug, Default, Deserialize)]
struct UploadQuery {
    units: Option<Units>,
}

async fn create_project(
    State(state): State<AppState>,
    Query(q): Query<UploadQuery>,
    body: Bytes,
) -> Result<Response, AppError> {
    let settings = MeshSettings {
        units: q.units.unwrap_or_default(),
    };
    let id = format!("{:08x}", state.inner.next_id.fetch_add(1, Ordering::Relaxed));
    let dir = state.inner.root.join(&id);
    let project_id = id.clone();
    let (revision, diagnostics) = blocking(move || {
        stages::parse_mesh(&body, settings.units)?;
        let mut project = Project::create(&dir, &project_id)?;
        let diagnostics = stages::import_mesh(&mut project, &body, settings)?;
        Ok((project.revision(), diagnostics))
    })
    .await?;
    Ok(with_revision(
        revision,
        StatusCode::CREATED,
        json!({ "id": id, "revision": revision, "diagnostics": diagnostics }),
    ))
}

async fn manifest(State(state): State<AppState>, UrlPath(id): UrlPath<String>) -> Result<Response, AppError> {
    let dir = state.project_dir(&id)?;
    let project = blocking(move || Project::open(&dir)).await?;
    let body = serde_json::to_value(project.manifest()).map_err(|e| AppError::Internal(e.to_string()))?;
    Ok(with_revision(project.revision(), StatusCode::OK, body))
}

async fn voxelize(
    State(state): State<AppState>,
    UrlPath(id): UrlPath<String>,
    body: Bytes,
) -> Result<Response, AppError> {
    let settings: VoxelizeSettings = parse_body(&body)?;
    let (revision, summary) = state.mutate(&id, move |p| stages::run_voxelize(p, settings)).await?;
    Ok(with_revision(
        revision,
        StatusCode::OK,
        json!({ "revision": revision, "grid": summary }),
    ))
}

async fn route(State(state): State<AppState>, UrlPath(id): UrlPath<String>, body: Bytes) -> Result<Response, AppError> {
    let request = RouteRequest::parse(&body)?;
    let (revision, doc) = state.mutate(&id, move |p| stages::run_route(p, &request)).await?;
    let violations = doc.violations.clone();
    Ok(with_revision(
        revision,
        StatusCode::OK,
        json!({ "revision": revision, "path": doc, "violations": violations }),
    ))
}

/// Carves, opens ports, checks printability and exports the STL in one step.
async fn carve(State(state): State<AppState>, UrlPath(id): UrlPath<String>, body: Bytes) -> Result<Response, AppError> {
    let request: FinishRequest = parse_body(&body)?;
    let (revision, report) = state.mutate(&id, move |p| stages::run_finish(p, request)).await?;
    Ok(with_revision(
        revision,
        StatusCode::OK,
        json!({ "revision": revision, "report": report }),
    ))
}

async fn report(State(state): State<AppState>, UrlPath(id): UrlPath<String>) -> Result<Response, AppError> {
    let (revision, bytes) = state.read(&id, Stage::Report, "report.json").await?;
    Ok(raw(revision, "application/json", bytes))
}

async fn path(State(state): State<AppState>, UrlPath(id): UrlPath<String>) -> Result<Response, AppError> {
    let (revision, bytes) = state.read(&id, Stage::Path, "path.json").await?;
    Ok(raw(revision, "application/json", bytes))
}

#[derive(Debug, Default, Clone, Copy, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum MeshStage {
    #[default]
    Input,
    Carved,
}

#[derive(Debug, Default, Deserialize)]
struct MeshQuery {
    stage: Option<MeshStage>,
}

async fn mesh(
    State(state): State<AppState>,
    UrlPath(id): UrlPath<String>,
    Query(q): Query<MeshQuery>,
) -> Result<Response, AppError> {
    let (stage, file) = match q.stage.unwrap_or_default() {
        MeshStage::Input => (Stage::Mesh, "input.stl"),
        MeshStage::Carved => (Stage::Export, "carved.stl"),
    };
    let (revision, bytes) = state.read(&id, stage, file).await?;
    Ok(raw(revision, "model/stl", bytes))
}
