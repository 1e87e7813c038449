//! Projects on disk: one directory of artifact files plus `manifest.json`.
//! Files are written to a temporary name and renamed into place so readers
//! only ever see complete artifacts.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{AppError, AppResult};

pub const MANIFEST: &str = "manifest.json";

/// Pipeline stages in dependency order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Mesh,
    Grid,
    Path,
    Carved,
    Report,
    Export,
}

impl Stage {
    pub const ALL: [Stage; 6] = [
        Stage::Mesh,
        Stage::Grid,
        Stage::Path,
        Stage::Carved,
        Stage::Report,
        Stage::Export,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Mesh => "mesh",
            Stage::Grid => "grid",
            Stage::Path => "path",
            Stage::Carved => "carved",
            Stage::Report => "report",
            Stage::Export => "export",
        }
    }

    /// Command that produces this stage.
    pub fn producer(self) -> &'static str {
        match self {
            Stage::Mesh | Stage::Grid => "voxelize",
            Stage::Path => "route",
            Stage::Carved => "carve",
            Stage::Report => "check",
            Stage::Export => "export",
        }
    }

    pub fn files(self) -> &'static [&'static str] {
        match self {
            Stage::Mesh => &["input.stl"],
            Stage::Grid => &["grid.json", "grid.raw"],
            Stage::Path => &["keypoints.json", "path.json", "path.obj"],
            Stage::Carved => &["carved.json"],
            Stage::Report => &["report.json"],
            Stage::Export => &["carved.stl"],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    /// Project revision at which the stage was produced.
    pub revision: u64,
    /// Settings the stage was produced with.
    pub config: Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub id: String,
    pub revision: u64,
    pub stages: BTreeMap<Stage, StageRecord>,
}

#[derive(Debug, Clone)]
pub struct Project {
    dir: PathBuf,
    manifest: Manifest,
}

impl Project {
    pub fn open(dir: &Path) -> AppResult<Self> {
        let path = dir.join(MANIFEST);
        let bytes = match fs::read(&path) {
            Ok(b) => b,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
                return Err(AppError::NotFound(dir.display().to_string()));
            }
            Err(e) => return Err(AppError::io(format!("reading {}", path.display()))(e)),
        };
        let manifest = serde_json::from_slice(&bytes)
            .map_err(|e| AppError::Internal(format!("corrupt manifest {}: {e}", path.display())))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            manifest,
        })
    }

    pub fn create(dir: &Path, id: &str) -> AppResult<Self> {
        fs::create_dir_all(dir).map_err(AppError::io(format!("creating {}", dir.display())))?;
        let project = Self {
            dir: dir.to_path_buf(),
            manifest: Manifest {
                id: id.to_string(),
                revision: 0,
                stages: BTreeMap::new(),
            },
        };
        project.write_manifest()?;
        Ok(project)
    }

    /// Opens the project in `dir`, creating it if there is none.
    pub fn open_or_create(dir: &Path) -> AppResult<Self> {
        match Self::open(dir) {
            Err(AppError::NotFound(_)) => {
                let id = dir
                    .file_name()
                    .map_or_else(|| "project".into(), |n| n.to_string_lossy().into_owned());
                Self::create(dir, &id)
            }
            other => other,
        }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn manifest(&self) -> &Manifest {
        &self.manifest
    }

    pub fn revision(&self) -> u64 {
        self.manifest.revision
    }

    pub fn has(&self, stage: Stage) -> bool {
        self.manifest.stages.contains_key(&stage)
    }

    pub fn require(&self, stage: Stage) -> AppResult<()> {
        if self.has(stage) {
            Ok(())
        } else {
            Err(AppError::MissingStage(stage))
        }
    }

    pub fn read(&self, stage: Stage, file: &str) -> AppResult<Vec<u8>> {
        self.require(stage)?;
        let path = self.dir.join(file);
        fs::read(&path).map_err(AppError::io(format!("reading {}", path.display())))
    }

    /// Writes a stage's artifacts, drops every later stage and bumps the
    /// revision.
    pub fn publish(&mut self, stage: Stage, files: &[(&str, &[u8])], config: Value) -> AppResult<u64> {
        if let Some(prev) = Stage::ALL
            .iter()
            .copied()
            .filter(|s| *s < stage)
            .find(|s| !self.has(*s))
        {
            return Err(AppError::MissingStage(prev));
        }
        for later in Stage::ALL.iter().copied().filter(|s| *s >= stage) {
            if self.manifest.stages.remove(&later).is_some() || later == stage {
                for f in later.files() {
                    let _ = fs::remove_file(self.dir.join(f));
                }
            }
        }
        for (name, bytes) in files {
            debug_assert!(
                stage.files().contains(name),
                "{name} is not a {} artifact",
                stage.name()
            );
            write_atomic(&self.dir.join(name), bytes)?;
        }
        self.manifest.revision += 1;
        self.manifest.stages.insert(
            stage,
            StageRecord {
                revision: self.manifest.revision,
                config,
            },
        );
        self.write_manifest()?;
        Ok(self.manifest.revision)
    }

    fn write_manifest(&self) -> AppResult<()> {
        write_atomic(&self.dir.join(MANIFEST), &json_bytes(&self.manifest)?)
    }
}

pub fn write_atomic(path: &Path, bytes: &[u8]) -> AppResult<()> {
    let tmp = path.with_extension(format!(
        "{}.tmp",
        path.extension()
            .map_or_else(String::new, |e| e.to_string_lossy().into_owned())
    ));
    fs::write(&tmp, bytes).map_err(AppError::io(format!("writing {}", tmp.display())))?;
    fs::rename(&tmp, path).map_err(AppError::io(format!("renaming {}", tmp.display())))
}

/// Pretty JSON with a trailing newline; the canonical artifact encoding.
pub fn json_bytes<T: Serialize>(value: &T) -> AppResult<Vec<u8>> {
    let mut out = serde_json::to_vec_pretty(value).map_err(|e| AppError::Internal(e.to_string()))?;
    out.push(b'\n');
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn later_stages_are_dropped() {
        let dir = tempfile::tempdir().unwrap();
        let mut p = Project::create(dir.path(), "t").unwrap();
        p.publish(Stage::Mesh, &[("input.stl", b"m")], Value::Null).unwrap();
        p.publish(Stage::Grid, &[("grid.json", b"{}"), ("grid.raw", b"")], Value::Null)
            .unwrap();
        p.publish(Stage::Path, &[("path.json", b"{}")], Value::Null).unwrap();
        assert_eq!(p.revision(), 3);
        p.publish(Stage::Grid, &[("grid.json", b"{}"), ("grid.raw", b"")], Value::Null)
            .unwrap();
        assert!(!p.has(Stage::Path));
        assert!(!dir.path().join("path.json").exists());
        assert_eq!(p.revision(), 4);
        let reopened = Project::open(dir.path()).unwrap();
        assert_eq!(reopened.manifest(), p.manifest());
    }

    #[test]
    fn stage_order_enforced() {
        let dir = tempfile::tempdir().unwrap();
        let mut p = Project::create(dir.path(), "t").unwrap();
        let err = p.publish(Stage::Path, &[], Value::Null).unwrap_err();
        assert!(matches!(err, AppError::MissingStage(Stage::Mesh)));
        assert_eq!(err.exit_code(), 2);
        assert!(matches!(
            p.read(Stage::Grid, "grid.json"),
            Err(AppError::MissingStage(Stage::Grid))
        ));
    }
}
