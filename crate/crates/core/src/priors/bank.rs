use std::collections::{BTreeSet, HashSet};
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::mean_shift::{euclidean, mean_shift_seeded, nearest, ClusterResult};
use crate::error::{Error, Result};
use crate::voxel::{load_grid, overlap_count, save_grid, union, write_atomic, VoxelGrid};

/// Default number of priors.
pub const DEFAULT_BANK_SIZE: usize = 112;

/// Side of the pooled grid used as the clustering feature.
pub const EMBED_SIDE: usize = 8;

/// Seeds beyond this count are subsampled with the bank seed.
pub const MAX_SEEDS: usize = 256;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BankKind {
    SeenCategory,
    CategorySpecific,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PriorBank {
    pub priors: Vec<VoxelGrid>,
    pub kind: BankKind,
    /// Contributing object ids, one list per prior.
    pub source_ids: Vec<Vec<String>>,
    /// Requested bank size.
    pub requested: usize,
    /// Set when fewer than `requested` priors could be produced.
    pub fallback: bool,
    /// Mean-shift bandwidth used for seen-category banks.
    pub bandwidth: Option<f64>,
}

impl PriorBank {
    pub fn len(&self) -> usize {
        self.priors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.priors.is_empty()
    }

    pub fn resolution(&self) -> Option<usize> {
        self.priors.first().map(VoxelGrid::resolution)
    }

    /// Checks the bank-level invariants.
    pub fn validate(&self) -> Result<()> {
        if self.priors.len() != self.source_ids.len() {
            return Err(Error::Corruption("source id list does not match priors".into()));
        }
        if let Some(n) = self.resolution() {
            if self.priors.iter().any(|p| p.resolution() != n) {
                return Err(Error::Shape("priors have mixed resolutions".into()));
            }
        }
        if self.kind == BankKind::CategorySpecific {
            let mut seen = HashSet::new();
            for id in self.source_ids.iter().flatten() {
                if !seen.insert(id) {
                    return Err(Error::Corruption(format!("object {id} used by two priors")));
                }
            }
        }
        Ok(())
    }
}

/// Average-pools occupancy down to an 8^3 grid and flattens it.
pub fn embed_shape(grid: &VoxelGrid) -> Vec<f64> {
    let n = grid.resolution();
    let side = EMBED_SIDE.min(n);
    let block = n / side;
    let mut out = vec![0.0; side.pow(3)];
    for [x, y, z] in grid.occupied() {
        let (bx, by, bz) = ((x / block).min(side - 1), (y / block).min(side - 1), (z / block).min(side - 1));
        out[bx + side * (by + side * bz)] += 1.0;
    }
    let cell = (block * block * block) as f64;
    out.iter_mut().for_each(|v| *v /= cell);
    out
}

fn count_modes(features: &[Vec<f64>], seeds: &[usize], bandwidth: f64) -> Result<ClusterResult<f64>> {
    mean_shift_seeded(features, seeds, bandwidth, 300, 1e-6 * bandwidth)
}

/// Selects `m` representative complete shapes by mean-shift clustering.
pub fn build_seen_prior_bank(complete_shapes: &[VoxelGrid], m: usize, seed: u64) -> Result<PriorBank> {
    if m == 0 {
        return Err(Error::Config("bank size must be positive".into()));
    }
    if complete_shapes.len() < m {
        return Err(Error::Config(format!(
            "{} shapes cannot supply {m} priors",
            complete_shapes.len()
        )));
    }
    let n = complete_shapes[0].resolution();
    if complete_shapes.iter().any(|g| g.resolution() != n) {
        return Err(Error::Shape("shapes have mixed resolutions".into()));
    }

    let features: Vec<Vec<f64>> = complete_shapes.iter().map(embed_shape).collect();
    let seeds: Vec<usize> = if features.len() > MAX_SEEDS {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut s = sample(&mut rng, features.len(), MAX_SEEDS).into_vec();
        s.sort_unstable();
        s
    } else {
        (0..features.len()).collect()
    };

    let mut span = 0.0f64;
    for i in 0..features.len() {
        for j in i + 1..features.len() {
            span = span.max(euclidean(&features[i], &features[j]));
        }
    }

    let clusters = if span == 0.0 {
        count_modes(&features, &seeds, 1.0)?
    } else {
        let (mut lo, mut hi) = (0.01 * span, span);
        // smallest mode count that still reaches m
        let mut best: Option<ClusterResult<f64>> = None;
        for _ in 0..40 {
            let mid = 0.5 * (lo + hi);
            let r = count_modes(&features, &seeds, mid)?;
            let k = r.modes.len();
            if k >= m && best.as_ref().is_none_or(|b| k <= b.modes.len()) {
                best = Some(r.clone());
            }
            if (m..=2 * m).contains(&k) {
                break;
            }
            if k > 2 * m {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        match best {
            Some(b) => b,
            None => count_modes(&features, &seeds, 0.01 * span)?,
        }
    };

    let sizes = clusters.cluster_sizes();
    let mut order: Vec<usize> = (0..clusters.modes.len()).filter(|&c| sizes[c] > 0).collect();
    order.sort_by(|&a, &b| sizes[b].cmp(&sizes[a]));
    order.truncate(m);

    let mut priors = Vec::with_capacity(order.len());
    let mut source_ids = Vec::with_capacity(order.len());
    for c in order {
        let members: Vec<usize> = (0..features.len()).filter(|&i| clusters.labels[i] == c).collect();
        let member_features: Vec<Vec<f64>> = members.iter().map(|&i| features[i].clone()).collect();
        let rep = members[nearest(&member_features, &clusters.modes[c])];
        let shape = &complete_shapes[rep];
        priors.push(shape.clone());
        source_ids.push(vec![shape
            .object_id()
            .map(str::to_owned)
            .unwrap_or_else(|| format!("#{rep}"))]);
    }
    let fallback = priors.len() < m;
    if fallback {
        log::warn!("seen-category bank reduced to {} of {m} priors", priors.len());
    }
    Ok(PriorBank {
        priors,
        kind: BankKind::SeenCategory,
        source_ids,
        requested: m,
        fallback,
        bandwidth: Some(clusters.bandwidth),
    })
}

/// A candidate pairing of two partial scans from different objects.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PartialPair {
    pub first: usize,
    pub second: usize,
    pub overlap: usize,
}

/// All cross-object pairs, sorted by overlap then by object-id pair then by index.
pub fn ranked_pairs(partials: &[VoxelGrid]) -> Result<Vec<PartialPair>> {
    let ids = object_ids(partials)?;
    let mut pairs = Vec::new();
    for i in 0..partials.len() {
        for j in i + 1..partials.len() {
            if ids[i] == ids[j] {
                continue;
            }
            let (a, b) = if ids[i] <= ids[j] { (i, j) } else { (j, i) };
            pairs.push(PartialPair {
                first: a,
                second: b,
                overlap: overlap_count(&partials[a], &partials[b])?,
            });
        }
    }
    pairs.sort_by(|p, q| {
        p.overlap
            .cmp(&q.overlap)
            .then_with(|| (ids[p.first], ids[p.second]).cmp(&(ids[q.first], ids[q.second])))
            .then_with(|| (p.first, p.second).cmp(&(q.first, q.second)))
    });
    Ok(pairs)
}

fn object_ids(partials: &[VoxelGrid]) -> Result<Vec<&str>> {
    partials
        .iter()
        .enumerate()
        .map(|(i, g)| {
            g.object_id()
                .ok_or_else(|| Error::Config(format!("partial {i} has no object id")))
        })
        .collect()
}

/// Greedily pairs the least-overlapping partial scans of distinct objects.
pub fn build_category_prior_bank(partials: &[VoxelGrid], m: usize) -> Result<PriorBank> {
    if m == 0 {
        return Err(Error::Config("bank size must be positive".into()));
    }
    let ids = object_ids(partials)?;
    let distinct: BTreeSet<&str> = ids.iter().copied().collect();
    if distinct.len() < 2 {
        return Err(Error::Config(format!(
            "category bank needs at least 2 distinct objects, got {}",
            distinct.len()
        )));
    }
    if let Some(n) = partials.first().map(VoxelGrid::resolution) {
        if partials.iter().any(|g| g.resolution() != n) {
            return Err(Error::Shape("partials have mixed resolutions".into()));
        }
    }

    let mut used: HashSet<&str> = HashSet::new();
    let mut priors = Vec::new();
    let mut source_ids = Vec::new();
    for pair in ranked_pairs(partials)? {
        if priors.len() == m {
            break;
        }
        let (a, b) = (ids[pair.first], ids[pair.second]);
        if used.contains(a) || used.contains(b) {
            continue;
        }
        used.insert(a);
        used.insert(b);
        priors.push(union(&partials[pair.first], &partials[pair.second])?);
        source_ids.push(vec![a.to_owned(), b.to_owned()]);
    }
    let fallback = priors.len() < m;
    if fallback {
        log::warn!(
            "only {} disjoint object pairs available, bank shrunk from {m}",
            priors.len()
        );
    }
    Ok(PriorBank {
        priors,
        kind: BankKind::CategorySpecific,
        source_ids,
        requested: m,
        fallback,
        bandwidth: None,
    })
}

#[derive(Debug, Serialize, Deserialize)]
struct BankEntry {
    path: String,
    source_ids: Vec<String>,
}

#[derive(Debug, Serialize, Deserialize)]
struct BankManifest {
    kind: BankKind,
    m: usize,
    size: usize,
    fallback: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    bandwidth: Option<f64>,
    priors: Vec<BankEntry>,
}

pub const BANK_MANIFEST: &str = "bank.json";

/// Writes priors as WVOX files plus a `bank.json` manifest into `dir`.
pub fn save_bank(bank: &PriorBank, dir: impl AsRef<Path>) -> Result<PathBuf> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut entries = Vec::with_capacity(bank.len());
    for (i, (prior, ids)) in bank.priors.iter().zip(&bank.source_ids).enumerate() {
        let name = format!("prior_{i:03}.wvox");
        save_grid(prior, dir.join(&name))?;
        entries.push(BankEntry {
            path: name,
            source_ids: ids.clone(),
        });
    }
    let manifest = BankManifest {
        kind: bank.kind,
        m: bank.requested,
        size: bank.len(),
        fallback: bank.fallback,
        bandwidth: bank.bandwidth,
        priors: entries,
    };
    let path = dir.join(BANK_MANIFEST);
    let json = serde_json::to_vec_pretty(&manifest).map_err(|e| Error::json(&path, e))?;
    write_atomic(&path, &json)?;
    Ok(path)
}

/// Loads a bank from its manifest path or the directory holding it.
pub fn load_bank(path: impl AsRef<Path>) -> Result<PriorBank> {
    let mut path = path.as_ref().to_path_buf();
    if path.is_dir() {
        path = path.join(BANK_MANIFEST);
    }
    let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
    let manifest: BankManifest = serde_json::from_slice(&bytes).map_err(|e| Error::json(&path, e))?;
    let dir = path.parent().unwrap_or(Path::new("."));
    let priors = manifest
        .priors
        .iter()
        .map(|e| load_grid(dir.join(&e.path)))
        .collect::<Result<Vec<_>>>()?;
    if priors.len() != manifest.size {
        return Err(Error::Corruption(format!(
            "manifest size {} but {} priors listed",
            manifest.size,
            priors.len()
        )));
    }
    let bank = PriorBank {
        priors,
        kind: manifest.kind,
        source_ids: manifest.priors.into_iter().map(|e| e.source_ids).collect(),
        requested: manifest.m,
        fallback: manifest.fallback,
        bandwidth: manifest.bandwidth,
    };
    bank.validate()?;
    Ok(bank)
}
