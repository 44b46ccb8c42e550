use std::collections::{BTreeSet, HashSet};
use std::fs;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::scan::{add_noise, random_direction, simulate_partial_scan};
use super::shapes::{sample_shape, FAMILIES};
use crate::error::{Error, Result};
use crate::voxel::{load_grid, save_grid, write_atomic, GridMeta, VoxelGrid};

pub const MANIFEST_NAME: &str = "manifest.json";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Test,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetEntry {
    pub object_id: String,
    pub category: String,
    pub split: Split,
    /// Relative to the manifest directory.
    pub complete_path: String,
    pub partial_paths: Vec<String>,
}

/// Generator settings, recorded in the manifest.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ToyDatasetSpec {
    pub resolution: usize,
    pub categories: Vec<String>,
    /// Categories held out of training.
    pub unseen: Vec<String>,
    pub per_category: usize,
    pub scans_per_object: usize,
    pub seed: u64,
    #[serde(default)]
    pub noise_sigma: f64,
}

impl ToyDatasetSpec {
    /// All four families; `basket` and `bench` unseen.
    pub fn new(resolution: usize, per_category: usize, scans_per_object: usize, seed: u64) -> Self {
        Self {
            resolution,
            categories: FAMILIES.iter().map(|s| s.to_string()).collect(),
            unseen: vec!["basket".into(), "bench".into()],
            per_category,
            scans_per_object,
            seed,
            noise_sigma: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if ![16, 32].contains(&self.resolution) {
            return Err(Error::Config(format!(
                "toy resolution must be 16 or 32, got {}",
                self.resolution
            )));
        }
        if self.per_category == 0 || self.scans_per_object == 0 {
            return Err(Error::Config("per_category and scans_per_object must be positive".into()));
        }
        for c in self.categories.iter().chain(&self.unseen) {
            if !FAMILIES.contains(&c.as_str()) {
                return Err(Error::Config(format!("unknown shape family {c:?}; known: {FAMILIES:?}")));
            }
        }
        if let Some(u) = self.unseen.iter().find(|u| !self.categories.contains(u)) {
            return Err(Error::Config(format!("unseen category {u} is not generated")));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub resolution: usize,
    pub generator: Option<ToyDatasetSpec>,
    pub entries: Vec<DatasetEntry>,
}

impl DatasetManifest {
    pub fn entries_in(&self, split: Split) -> impl Iterator<Item = &DatasetEntry> {
        self.entries.iter().filter(move |e| e.split == split)
    }

    pub fn categories(&self, split: Split) -> Vec<String> {
        let set: BTreeSet<&str> = self.entries_in(split).map(|e| e.category.as_str()).collect();
        set.into_iter().map(str::to_owned).collect()
    }

    /// Structural checks that need no file access.
    pub fn check_structure(&self) -> Result<()> {
        let mut ids = HashSet::new();
        for e in &self.entries {
            if !ids.insert(&e.object_id) {
                return Err(Error::Config(format!("duplicate object id {}", e.object_id)));
            }
        }
        let train: HashSet<&str> = self.entries_in(Split::Train).map(|e| e.category.as_str()).collect();
        if let Some(e) = self.entries_in(Split::Test).find(|e| train.contains(e.category.as_str())) {
            return Err(Error::Config(format!(
                "test category {} also appears in training",
                e.category
            )));
        }
        Ok(())
    }

    /// Loads every referenced grid and checks its resolution.
    pub fn verify_files(&self, root: &Path) -> Result<()> {
        for e in &self.entries {
            for p in std::iter::once(&e.complete_path).chain(&e.partial_paths) {
                let g = load_grid(root.join(p))?;
                if g.resolution() != self.resolution {
                    return Err(Error::Shape(format!(
                        "{p} has resolution {}, manifest says {}",
                        g.resolution(),
                        self.resolution
                    )));
                }
            }
        }
        Ok(())
    }
}

pub fn save_manifest(manifest: &DatasetManifest, path: &Path) -> Result<()> {
    let json = serde_json::to_vec_pretty(manifest).map_err(|e| Error::json(path, e))?;
    write_atomic(path, &json)
}

pub fn load_manifest(path: impl AsRef<Path>) -> Result<DatasetManifest> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let m: DatasetManifest = serde_json::from_slice(&bytes).map_err(|e| Error::json(path, e))?;
    m.check_structure()?;
    Ok(m)
}

/// Seed for one object, independent of generation order.
fn object_seed(seed: u64, category: usize, index: usize) -> u64 {
    let mut z = seed ^ ((category as u64) << 40) ^ (index as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// A generated object before it is written to disk.
#[derive(Clone, Debug)]
pub struct ToyObject {
    pub entry: DatasetEntry,
    pub complete: VoxelGrid,
    pub partials: Vec<VoxelGrid>,
}

/// Generates the corpus in memory.
pub fn generate_objects(spec: &ToyDatasetSpec) -> Result<Vec<ToyObject>> {
    spec.validate()?;
    let jobs: Vec<(usize, &String, usize)> = spec
        .categories
        .iter()
        .enumerate()
        .flat_map(|(ci, c)| (0..spec.per_category).map(move |i| (ci, c, i)))
        .collect();
    jobs.par_iter()
        .map(|&(ci, category, index)| {
            let mut rng = ChaCha8Rng::seed_from_u64(object_seed(spec.seed, ci, index));
            let object_id = format!("{category}_{index:03}");
            let meta = GridMeta {
                object_id: Some(object_id.clone()),
                category: Some(category.clone()),
            };
            let complete = sample_shape(category, spec.resolution, &mut rng)
                .expect("family validated")
                .with_meta(meta);
            let partials = (0..spec.scans_per_object)
                .map(|s| {
                    let scan = simulate_partial_scan(&complete, random_direction(&mut rng))?;
                    add_noise(&scan, spec.noise_sigma, object_seed(spec.seed, ci, index) ^ s as u64)
                })
                .collect::<Result<Vec<_>>>()?;
            let split = if spec.unseen.contains(category) {
                Split::Test
            } else {
                Split::Train
            };
            let dir = format!("objects/{object_id}");
            Ok(ToyObject {
                entry: DatasetEntry {
                    complete_path: format!("{dir}/complete.wvox"),
                    partial_paths: (0..partials.len()).map(|s| format!("{dir}/scan_{s:02}.wvox")).collect(),
                    object_id,
                    category: category.clone(),
                    split,
                },
                complete,
                partials,
            })
        })
        .collect()
}

/// Generates the corpus and writes it, with `manifest.json`, under `out_dir`.
pub fn gen_toy_dataset(spec: &ToyDatasetSpec, out_dir: impl AsRef<Path>) -> Result<DatasetManifest> {
    let out_dir = out_dir.as_ref();
    let objects = generate_objects(spec)?;
    objects.par_iter().try_for_each(|o| -> Result<()> {
        let dir = out_dir.join("objects").join(&o.entry.object_id);
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        save_grid(&o.complete, out_dir.join(&o.entry.complete_path))?;
        for (g, p) in o.partials.iter().zip(&o.entry.partial_paths) {
            save_grid(g, out_dir.join(p))?;
        }
        Ok(())
    })?;
    let manifest = DatasetManifest {
        resolution: spec.resolution,
        generator: Some(spec.clone()),
        entries: objects.into_iter().map(|o| o.entry).collect(),
    };
    manifest.check_structure()?;
    save_manifest(&manifest, &out_dir.join(MANIFEST_NAME))?;
    Ok(manifest)
}

/// Directory that manifest-relative paths resolve against.
pub fn manifest_root(manifest_path: &Path) -> PathBuf {
    manifest_path
        .parent()
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from("."))
}
