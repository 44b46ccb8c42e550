use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use voxcomplete::datagen::{gen_toy_dataset, load_manifest, DatasetEntry, Split};
use voxcomplete::network::{load_checkpoint, save_checkpoint, ModelParams};
use voxcomplete::pipeline::{
    audit_access, casr_partials, category_banks, cosl_pairs, evaluate, inference_inputs, refine_casr,
    run_cosl_inference, seen_bank, train_cosl, DataStore, Phase, RunConfig, RunLog, ACCESS_LOG_NAME,
    RESOLVED_CONFIG_NAME,
};
use voxcomplete::priors::{load_bank, save_bank, BankKind, PriorBank};
use voxcomplete::voxel::{binarize, load_field, load_grid, save_field, save_grid, write_atomic, VoxelGrid};
use voxcomplete::Error;

use crate::args::{Cli, Command, Common, ExportFormat, HpFlags};
use crate::export::{cubes_obj, points_text};

/// Scalar type used for training and inference.
type Real = f32;

#[derive(Debug)]
pub enum CliError {
    Core(Error),
    Usage(String),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Core(e)
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Core(e) => write!(f, "{e}"),
            CliError::Usage(m) => f.write_str(m),
        }
    }
}

impl CliError {
    /// 1 for bad input, 2 for failures while doing the work.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Core(e) if e.is_validation() => 1,
            CliError::Core(_) => 2,
        }
    }

    pub fn hint(&self) -> Option<&'static str> {
        match self {
            CliError::Core(Error::Config(_)) => Some("run with --help for flags; --config takes key=value lines"),
            CliError::Core(Error::Io { .. }) => Some("check that the path exists and is readable"),
            CliError::Core(Error::NonFinite { .. }) => Some("try a lower learning rate (lr=... in --config)"),
            _ => None,
        }
    }
}

type CliResult<T = ()> = Result<T, CliError>;

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::Core(Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn create_dir(path: &Path) -> CliResult {
    fs::create_dir_all(path).map_err(|e| io_err(path, e))
}

/// Toy preset, then the overlay file, then flags; validated and snapshotted under `--out`.
fn resolve(common: &Common, base_resolution: Option<usize>, hp: Option<&HpFlags>, threshold: Option<f64>) -> CliResult<RunConfig> {
    let mut cfg = RunConfig::toy(base_resolution.unwrap_or(16));
    if let Some(path) = &common.config {
        cfg.apply_overlay_file(path)?;
    }
    if let Some(n) = common.resolution {
        cfg.set_resolution(n);
    }
    if let Some(seed) = common.seed {
        cfg.set_seed(seed);
    }
    if let Some(hp) = hp {
        for (key, v) in [("alpha", hp.alpha), ("lambda", hp.lambda), ("gamma1", hp.gamma1), ("gamma2", hp.gamma2)] {
            if let Some(v) = v {
                cfg.set(key, &v.to_string())?;
            }
        }
    }
    if let Some(t) = threshold {
        cfg.set("threshold", &t.to_string())?;
    }
    cfg.validate()?;
    create_dir(&common.out)?;
    cfg.save(common.out.join(RESOLVED_CONFIG_NAME))?;
    Ok(cfg)
}

fn open_store(manifest: &Path) -> CliResult<DataStore> {
    Ok(DataStore::open(manifest)?)
}

fn expect_kind(bank: &PriorBank, kind: BankKind, path: &Path) -> CliResult {
    if bank.kind != kind {
        return Err(CliError::Usage(format!("{} holds a {:?} bank, expected {kind:?}", path.display(), bank.kind)));
    }
    Ok(())
}

fn check_resolution(params: &ModelParams<Real>, n: usize) -> CliResult {
    if params.config().resolution != n {
        return Err(CliError::Core(Error::Shape(format!(
            "checkpoint resolution {} does not match data resolution {n}",
            params.config().resolution
        ))));
    }
    Ok(())
}

pub fn dispatch(cli: Cli) -> CliResult {
    match cli.command {
        Command::GenToy { common } => gen_toy(&common),
        Command::BuildPriors { manifest, common } => build_priors(&manifest, &common),
        Command::TrainCosl {
            manifest,
            bank,
            common,
            threshold,
        } => train(&manifest, &bank, &common, threshold),
        Command::InferCosl {
            manifest,
            bank,
            checkpoint,
            common,
            threshold,
        } => infer(&manifest, &bank, &checkpoint, &common, threshold),
        Command::RefineCasr {
            manifest,
            bank,
            pred,
            category,
            common,
            hp,
            threshold,
        } => refine(&manifest, &bank, &pred, category.as_deref(), &common, &hp, threshold),
        Command::Eval {
            pred,
            gt,
            manifest,
            common,
        } => eval(&pred, gt.as_deref(), &manifest, &common),
        Command::Export {
            inputs,
            format,
            threshold,
            common,
        } => export(&inputs, format, threshold, &common),
    }
}

fn gen_toy(common: &Common) -> CliResult {
    let cfg = resolve(common, None, None, None)?;
    let m = gen_toy_dataset(&cfg.dataset, &common.out)?;
    println!(
        "wrote {} objects ({} scans each) to {}",
        m.entries.len(),
        cfg.dataset.scans_per_object,
        common.out.display()
    );
    Ok(())
}

fn build_priors(manifest: &Path, common: &Common) -> CliResult {
    let store = open_store(manifest)?;
    let cfg = resolve(common, Some(store.manifest().resolution), None, None)?;
    let seen = seen_bank(&store, cfg.seen_bank_size, cfg.cosl.seed)?;
    save_bank(&seen, common.out.join("seen_bank"))?;
    println!("seen bank: {} priors (requested {})", seen.len(), seen.requested);
    for (category, bank) in category_banks(&store, cfg.category_bank_size)? {
        save_bank(&bank, common.out.join("category_banks").join(&category))?;
        if bank.fallback {
            log::warn!("{category}: only {} of {} priors available", bank.len(), bank.requested);
        }
        println!("category bank {category}: {} priors", bank.len());
    }
    store.write_access_log(common.out.join(ACCESS_LOG_NAME))?;
    Ok(())
}

fn train(manifest: &Path, bank_path: &Path, common: &Common, threshold: Option<f64>) -> CliResult {
    let store = open_store(manifest)?;
    let cfg = resolve(common, Some(store.manifest().resolution), None, threshold)?;
    let bank = load_bank(bank_path)?;
    expect_kind(&bank, BankKind::SeenCategory, bank_path)?;
    let pairs = cosl_pairs(&store, cfg.cosl.scans_per_object)?;
    let mut log = RunLog::to_file(common.out.join("train_log.jsonl"))?.with_snapshot_dir(&common.out);
    let outcome = train_cosl::<Real>(&pairs, &bank, &cfg.arch, &cfg.cosl, &mut log)?;
    let path = common.out.join("cosl.ckpt");
    save_checkpoint(&outcome.trained.params, &path)?;
    store.write_access_log(common.out.join(ACCESS_LOG_NAME))?;
    println!(
        "best validation IoU {:.4} at epoch {} ({} steps); checkpoint {} sha256 {}",
        outcome.trained.best_score,
        outcome.trained.best_epoch,
        outcome.trained.steps,
        path.display(),
        outcome.trained.params.checksum()
    );
    Ok(())
}

fn infer(manifest: &Path, bank_path: &Path, checkpoint: &Path, common: &Common, threshold: Option<f64>) -> CliResult {
    let store = open_store(manifest)?;
    let cfg = resolve(common, Some(store.manifest().resolution), None, threshold)?;
    let bank = load_bank(bank_path)?;
    expect_kind(&bank, BankKind::SeenCategory, bank_path)?;
    let params: ModelParams<Real> = load_checkpoint(checkpoint)?;
    check_resolution(&params, store.manifest().resolution)?;
    let dir = common.out.join("coarse");
    create_dir(&dir)?;
    let mut count = 0;
    for category in store.manifest().categories(Split::Test) {
        let inputs = inference_inputs(&store, &category)?;
        for g in run_cosl_inference(&params, &inputs, &bank, cfg.threshold)? {
            let id = g.object_id().expect("manifest grids carry ids").to_string();
            save_grid(&g, dir.join(format!("{id}.wvox")))?;
            count += 1;
        }
    }
    store.write_access_log(common.out.join(ACCESS_LOG_NAME))?;
    println!("wrote {count} coarse shapes to {}", dir.display());
    Ok(())
}

fn refine(
    manifest: &Path,
    bank_dir: &Path,
    pred: &Path,
    only: Option<&str>,
    common: &Common,
    hp: &HpFlags,
    threshold: Option<f64>,
) -> CliResult {
    let store = open_store(manifest)?;
    let cfg = resolve(common, Some(store.manifest().resolution), Some(hp), threshold)?;
    let categories: Vec<String> = store
        .manifest()
        .categories(Split::Test)
        .into_iter()
        .filter(|c| only.map_or(true, |o| o == c))
        .collect();
    if categories.is_empty() {
        return Err(CliError::Usage(format!("no test category matches {:?}", only.unwrap_or("*"))));
    }
    let grids_dir = common.out.join("refined");
    let fields_dir = common.out.join("fields");
    create_dir(&grids_dir)?;
    create_dir(&fields_dir)?;
    let mut log = RunLog::to_file(common.out.join("casr_log.jsonl"))?.with_snapshot_dir(&common.out);
    for category in categories {
        let bank_path = bank_dir.join(&category);
        let bank = load_bank(&bank_path)?;
        expect_kind(&bank, BankKind::CategorySpecific, &bank_path)?;
        let entries = store.entries_of(Split::Test, &category);
        let coarse = entries
            .iter()
            .map(|e| load_grid(pred.join(format!("{}.wvox", e.object_id))))
            .collect::<Result<Vec<VoxelGrid>, _>>()?;
        let partials = casr_partials(&store, &category, cfg.casr.scans_per_object)?;
        log.set_category(Some(category.clone()));
        let outcome = refine_casr::<Real>(&coarse, &partials, &bank, &cfg.hp, &cfg.arch, &cfg.casr, &mut log)?;
        save_checkpoint(&outcome.trained.params, common.out.join(format!("casr_{category}.ckpt")))?;
        for (e, f) in entries.iter().zip(&outcome.refined) {
            save_field(f, fields_dir.join(format!("{}.wfld", e.object_id)))?;
            let g = binarize(f, cfg.threshold as Real);
            save_grid(&g, grids_dir.join(format!("{}.wvox", e.object_id)))?;
        }
        println!(
            "{category}: {} objects, best partial IoU {:.4} at epoch {}",
            entries.len(),
            outcome.trained.best_score,
            outcome.trained.best_epoch
        );
    }
    log.flush()?;
    store.write_access_log(common.out.join(ACCESS_LOG_NAME))?;
    let audit = audit_access(&store.access_log());
    if !audit.passed() {
        return Err(CliError::Core(Error::Corruption(format!(
            "refinement read ground truth: {:?}",
            audit.violations
        ))));
    }
    Ok(())
}

fn eval(pred: &Path, gt: Option<&Path>, manifest: &Path, common: &Common) -> CliResult {
    let m = load_manifest(manifest)?;
    let cfg_resolution = Some(m.resolution);
    resolve(common, cfg_resolution, None, None)?;
    let store = open_store(manifest)?;
    let entries: Vec<&DatasetEntry> = store
        .manifest()
        .entries
        .iter()
        .filter(|e| pred.join(format!("{}.wvox", e.object_id)).is_file())
        .collect();
    if entries.is_empty() {
        return Err(CliError::Usage(format!(
            "{} holds no <object_id>.wvox predictions for this manifest",
            pred.display()
        )));
    }
    let mut preds = Vec::new();
    let mut gts = Vec::new();
    let mut categories = Vec::new();
    for e in &entries {
        preds.push(load_grid(pred.join(format!("{}.wvox", e.object_id)))?);
        gts.push(match gt {
            Some(dir) => load_grid(dir.join(format!("{}.wvox", e.object_id)))?,
            None => store.complete(e, Phase::Evaluate)?,
        });
        categories.push(e.category.clone());
    }
    let report = evaluate(&preds, &gts, &categories)?;
    write_atomic(&common.out.join("report.json"), report.to_json().as_bytes())?;
    write_atomic(&common.out.join("report.txt"), report.to_table().as_bytes())?;
    print!("{}", report.to_table());
    Ok(())
}

fn load_any(path: &Path, threshold: f64) -> CliResult<VoxelGrid> {
    match path.extension().and_then(|e| e.to_str()) {
        Some("wfld") => Ok(binarize(&load_field::<f64>(path)?, threshold)),
        _ => Ok(load_grid(path)?),
    }
}

fn export(inputs: &[PathBuf], format: ExportFormat, threshold: Option<f64>, common: &Common) -> CliResult {
    let cfg = resolve(common, None, None, threshold)?;
    for path in inputs {
        let grid = load_any(path, cfg.threshold)?;
        if grid.is_vacant() {
            log::warn!("{} has no occupied voxels; writing an empty file", path.display());
        }
        let (text, ext) = match format {
            ExportFormat::Points => (points_text(&grid), "xyz"),
            ExportFormat::CubesObj => (cubes_obj(&grid), "obj"),
        };
        let stem = path.file_stem().map_or_else(|| "grid".into(), |s| s.to_string_lossy().into_owned());
        let target = common.out.join(format!("{stem}.{ext}"));
        write_atomic(&target, text.as_bytes())?;
        println!("{} -> {}", path.display(), target.display());
    }
    Ok(())
}
