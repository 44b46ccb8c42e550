use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use super::casr::refine_casr;
use super::cosl::{run_cosl_inference, train_cosl, TrainPair};
use super::data::{audit_access, AuditReport, DataStore, Phase, ACCESS_LOG_NAME};
use super::evaluate::{evaluate, MetricsReport};
use super::log::RunLog;
use super::run_config::{RunConfig, RESOLVED_CONFIG_NAME};
use crate::datagen::{gen_toy_dataset, DatasetEntry, Split};
use crate::error::{Error, Result};
use crate::network::save_checkpoint;
use crate::priors::{build_category_prior_bank, build_seen_prior_bank, save_bank, PriorBank};
use crate::scalar::Scalar;
use crate::voxel::{binarize, save_grid, VoxelGrid};

/// Seen-category bank from the complete shapes of the training split.
pub fn seen_bank(store: &DataStore, m: usize, seed: u64) -> Result<PriorBank> {
    let shapes = store
        .entries(Split::Train)
        .into_iter()
        .map(|e| store.complete(e, Phase::BuildPriors))
        .collect::<Result<Vec<_>>>()?;
    build_seen_prior_bank(&shapes, m, seed)
}

/// One category-specific bank per test category, built from each object's first scan.
pub fn category_banks(store: &DataStore, m: usize) -> Result<BTreeMap<String, PriorBank>> {
    store
        .manifest()
        .categories(Split::Test)
        .into_iter()
        .map(|c| {
            let partials = store
                .entries_of(Split::Test, &c)
                .into_iter()
                .map(|e| Ok(store.partials(e, Phase::BuildPriors, 1)?.remove(0)))
                .collect::<Result<Vec<VoxelGrid>>>()?;
            Ok((c, build_category_prior_bank(&partials, m)?))
        })
        .collect()
}

/// (partial, complete) pairs for every scan of every training object.
pub fn cosl_pairs(store: &DataStore, scans: usize) -> Result<Vec<TrainPair>> {
    let mut pairs = Vec::new();
    for e in store.entries(Split::Train) {
        let complete = store.complete(e, Phase::TrainCosl)?;
        for partial in store.partials(e, Phase::TrainCosl, scans)? {
            pairs.push(TrainPair {
                object_id: e.object_id.clone(),
                partial,
                complete: complete.clone(),
            });
        }
    }
    Ok(pairs)
}

/// First scan of each test object in `category`, the CoSL inference input.
pub fn inference_inputs(store: &DataStore, category: &str) -> Result<Vec<VoxelGrid>> {
    store
        .entries_of(Split::Test, category)
        .into_iter()
        .map(|e| Ok(store.partials(e, Phase::InferCosl, 1)?.remove(0)))
        .collect()
}

/// Partial scans of each test object in `category`; no complete shapes.
pub fn casr_partials(store: &DataStore, category: &str, scans: usize) -> Result<Vec<Vec<VoxelGrid>>> {
    store
        .entries_of(Split::Test, category)
        .into_iter()
        .map(|e| store.partials(e, Phase::RefineCasr, scans))
        .collect()
}

/// Ground truth for scoring, in entry order.
pub fn ground_truths(store: &DataStore, entries: &[&DatasetEntry]) -> Result<Vec<VoxelGrid>> {
    entries.iter().map(|e| store.complete(e, Phase::Evaluate)).collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct PipelineOutcome {
    /// CoSL output scored against ground truth.
    pub coarse_report: MetricsReport,
    /// Refined output scored against ground truth.
    pub report: MetricsReport,
    pub cosl_checksum: String,
    pub casr_checksums: BTreeMap<String, String>,
    pub audit: AuditReport,
}

/// Generates a toy corpus and runs priors, CoSL, CaSR and evaluation under `out_dir`.
pub fn run_toy_pipeline<T: Scalar>(cfg: &RunConfig, out_dir: impl AsRef<Path>) -> Result<PipelineOutcome> {
    cfg.validate()?;
    let out = out_dir.as_ref();
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    cfg.save(out.join(RESOLVED_CONFIG_NAME))?;
    let data_dir = out.join("data");
    gen_toy_dataset(&cfg.dataset, &data_dir)?;
    let store = DataStore::open(data_dir.join(crate::datagen::MANIFEST_NAME))?;

    let bank = seen_bank(&store, cfg.seen_bank_size, cfg.cosl.seed)?;
    save_bank(&bank, out.join("seen_bank"))?;
    let pairs = cosl_pairs(&store, cfg.cosl.scans_per_object)?;
    let mut log = RunLog::to_file(out.join("cosl_log.jsonl"))?.with_snapshot_dir(out);
    let cosl = train_cosl::<T>(&pairs, &bank, &cfg.arch, &cfg.cosl, &mut log)?;
    let cosl_params = cosl.trained.params;
    save_checkpoint(&cosl_params, out.join("cosl.ckpt"))?;

    let banks = category_banks(&store, cfg.category_bank_size)?;
    let mut casr_log = RunLog::to_file(out.join("casr_log.jsonl"))?.with_snapshot_dir(out);
    let (mut coarse_all, mut refined_all, mut categories, mut entries) = (vec![], vec![], vec![], vec![]);
    let mut casr_checksums = BTreeMap::new();
    for (category, cat_bank) in &banks {
        save_bank(cat_bank, out.join("category_banks").join(category))?;
        let inputs = inference_inputs(&store, category)?;
        let coarse = run_cosl_inference(&cosl_params, &inputs, &bank, cfg.threshold)?;
        let partials = casr_partials(&store, category, cfg.casr.scans_per_object)?;
        casr_log.set_category(Some(category.clone()));
        let casr = refine_casr::<T>(&coarse, &partials, cat_bank, &cfg.hp, &cfg.arch, &cfg.casr, &mut casr_log)?;
        save_checkpoint(&casr.trained.params, out.join(format!("casr_{category}.ckpt")))?;
        casr_checksums.insert(category.clone(), casr.trained.params.checksum());
        let refined_dir = out.join("refined");
        fs::create_dir_all(&refined_dir).map_err(|e| Error::io(&refined_dir, e))?;
        for (f, c) in casr.refined.iter().zip(&coarse) {
            let mut g = binarize(f, T::of(cfg.threshold));
            *g.meta_mut() = c.meta().clone();
            if let Some(id) = c.object_id() {
                save_grid(&g, refined_dir.join(format!("{id}.wvox")))?;
            }
            refined_all.push(g);
        }
        coarse_all.extend(coarse);
        for e in store.entries_of(Split::Test, category) {
            categories.push(category.clone());
            entries.push(e);
        }
    }
    casr_log.flush()?;
    let gts = ground_truths(&store, &entries)?;
    let coarse_report = evaluate(&coarse_all, &gts, &categories)?;
    let report = evaluate(&refined_all, &gts, &categories)?;
    crate::voxel::write_atomic(&out.join("report.json"), report.to_json().as_bytes())?;
    crate::voxel::write_atomic(&out.join("report.txt"), report.to_table().as_bytes())?;
    store.write_access_log(out.join(ACCESS_LOG_NAME))?;
    let audit = audit_access(&store.access_log());
    Ok(PipelineOutcome {
        coarse_report,
        report,
        cosl_checksum: cosl_params.checksum(),
        casr_checksums,
        audit,
    })
}
