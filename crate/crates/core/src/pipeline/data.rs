use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::datagen::{load_manifest, manifest_root, DatasetEntry, DatasetManifest, Split};
use crate::error::{Error, Result};
use crate::voxel::{load_grid, VoxelGrid};

pub const ACCESS_LOG_NAME: &str = "data_access.jsonl";

/// Pipeline phase on whose behalf data is read.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Phase {
    BuildPriors,
    TrainCosl,
    InferCosl,
    RefineCasr,
    Evaluate,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataKind {
    Complete,
    Partial,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AccessRecord {
    pub phase: Phase,
    pub kind: DataKind,
    pub object_id: String,
    pub category: String,
    pub split: Split,
    pub path: String,
}

/// Manifest-backed loader that records every file it hands out.
pub struct DataStore {
    manifest: DatasetManifest,
    root: PathBuf,
    access: Mutex<Vec<AccessRecord>>,
}

impl DataStore {
    pub fn new(manifest: DatasetManifest, root: impl Into<PathBuf>) -> Self {
        Self {
            manifest,
            root: root.into(),
            access: Mutex::new(Vec::new()),
        }
    }

    pub fn open(manifest_path: impl AsRef<Path>) -> Result<Self> {
        let path = manifest_path.as_ref();
        Ok(Self::new(load_manifest(path)?, manifest_root(path)))
    }

    pub fn manifest(&self) -> &DatasetManifest {
        &self.manifest
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn entries(&self, split: Split) -> Vec<&DatasetEntry> {
        self.manifest.entries_in(split).collect()
    }

    pub fn entries_of(&self, split: Split, category: &str) -> Vec<&DatasetEntry> {
        self.manifest.entries_in(split).filter(|e| e.category == category).collect()
    }

    fn load(&self, entry: &DatasetEntry, rel: &str, phase: Phase, kind: DataKind) -> Result<VoxelGrid> {
        let grid = load_grid(self.root.join(rel))?;
        if grid.resolution() != self.manifest.resolution {
            return Err(Error::Shape(format!(
                "{rel} has resolution {}, manifest says {}",
                grid.resolution(),
                self.manifest.resolution
            )));
        }
        self.access.lock().expect("access log").push(AccessRecord {
            phase,
            kind,
            object_id: entry.object_id.clone(),
            category: entry.category.clone(),
            split: entry.split,
            path: rel.to_string(),
        });
        Ok(tag(grid, entry))
    }

    pub fn complete(&self, entry: &DatasetEntry, phase: Phase) -> Result<VoxelGrid> {
        self.load(entry, &entry.complete_path, phase, DataKind::Complete)
    }

    /// The first `limit` partial scans of an object.
    pub fn partials(&self, entry: &DatasetEntry, phase: Phase, limit: usize) -> Result<Vec<VoxelGrid>> {
        entry
            .partial_paths
            .iter()
            .take(limit)
            .map(|p| self.load(entry, p, phase, DataKind::Partial))
            .collect()
    }

    pub fn access_log(&self) -> Vec<AccessRecord> {
        self.access.lock().expect("access log").clone()
    }

    /// Appends the access records to a JSON-lines file.
    pub fn write_access_log(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut f = std::fs::OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(|e| Error::io(path, e))?;
        for r in self.access.lock().expect("access log").iter() {
            let line = serde_json::to_string(r).map_err(|e| Error::json(path, e))?;
            writeln!(f, "{line}").map_err(|e| Error::io(path, e))?;
        }
        Ok(())
    }
}

fn tag(mut grid: VoxelGrid, entry: &DatasetEntry) -> VoxelGrid {
    let meta = grid.meta_mut();
    meta.object_id.get_or_insert_with(|| entry.object_id.clone());
    meta.category.get_or_insert_with(|| entry.category.clone());
    grid
}

pub fn read_access_log(path: impl AsRef<Path>) -> Result<Vec<AccessRecord>> {
    let path = path.as_ref();
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for line in BufReader::new(f).lines() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| Error::json(path, e))?);
    }
    Ok(out)
}

/// Result of checking that test-category ground truth was only used for scoring.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub records: usize,
    pub casr_reads: usize,
    /// Complete shapes of test objects read outside evaluation.
    pub violations: Vec<AccessRecord>,
}

impl AuditReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

pub fn audit_access(records: &[AccessRecord]) -> AuditReport {
    AuditReport {
        records: records.len(),
        casr_reads: records.iter().filter(|r| r.phase == Phase::RefineCasr).count(),
        violations: records
            .iter()
            .filter(|r| {
                r.kind == DataKind::Complete
                    && (r.phase == Phase::RefineCasr || (r.split == Split::Test && r.phase != Phase::Evaluate))
            })
            .cloned()
            .collect(),
    }
}
