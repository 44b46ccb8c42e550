use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::config::{Stage, TrainConfig};
use super::log::RunLog;
use super::train::{optimize, Problem, Trained};
use crate::error::{Error, Result};
use crate::losses::l1_full_with_grad;
use crate::network::{forward_batch, ArchConfig, ModelParams, SampleLoss};
use crate::priors::{BankKind, PriorBank};
use crate::scalar::Scalar;
use crate::voxel::{binarize, iou, VoxelGrid};

/// Salt separating the validation split stream from the shuffle stream.
const SPLIT_SALT: u64 = 0x5EED_0F5A_17ED_0001;

/// One supervised sample: a partial scan and the complete shape it came from.
#[derive(Clone, Debug)]
pub struct TrainPair {
    pub object_id: String,
    pub partial: VoxelGrid,
    pub complete: VoxelGrid,
}

#[derive(Clone, Debug)]
pub struct CoslOutcome<T> {
    pub trained: Trained<T>,
    pub train_objects: Vec<String>,
    /// Held-out objects; empty when selection fell back to the training set.
    pub val_objects: Vec<String>,
}

/// Splits object ids into (train, validation) with a seeded shuffle.
pub fn split_objects(ids: &[String], val_fraction: f64, seed: u64) -> (Vec<String>, Vec<String>) {
    let mut unique: Vec<String> = ids.iter().cloned().collect::<BTreeSet<_>>().into_iter().collect();
    let n = unique.len();
    let held = if val_fraction > 0.0 && n >= 2 {
        ((val_fraction * n as f64).round() as usize).clamp(1, n - 1)
    } else {
        0
    };
    unique.shuffle(&mut ChaCha8Rng::seed_from_u64(seed ^ SPLIT_SALT));
    let val = unique.split_off(n - held);
    (unique, val)
}

/// Mean IoU of binarized predictions against targets.
pub fn mean_iou<T: Scalar>(
    params: &ModelParams<T>,
    inputs: &[VoxelGrid],
    targets: &[&VoxelGrid],
    bank: &PriorBank,
    threshold: f64,
) -> Result<f64> {
    let fields = forward_batch(params, inputs, bank)?;
    let mut total = 0.0;
    for (f, t) in fields.iter().zip(targets) {
        total += iou(&binarize(f, T::of(threshold)), t)?;
    }
    Ok(total / inputs.len().max(1) as f64)
}

/// Trains the coarse completion model with full supervision.
pub fn train_cosl<T: Scalar>(
    pairs: &[TrainPair],
    bank: &PriorBank,
    arch: &ArchConfig,
    cfg: &TrainConfig,
    log: &mut RunLog,
) -> Result<CoslOutcome<T>> {
    if cfg.stage != Stage::Cosl {
        return Err(Error::Config("train_cosl needs a cosl TrainConfig".into()));
    }
    if bank.kind != BankKind::SeenCategory {
        return Err(Error::Config("CoSL requires a seen-category prior bank".into()));
    }
    if pairs.is_empty() {
        return Err(Error::Config("empty CoSL training set".into()));
    }
    bank.validate()?;
    let ids: Vec<String> = pairs.iter().map(|p| p.object_id.clone()).collect();
    let (train_objects, val_objects) = split_objects(&ids, cfg.val_fraction, cfg.seed);
    let train_set: BTreeSet<&String> = train_objects.iter().collect();
    let (train, val): (Vec<&TrainPair>, Vec<&TrainPair>) = pairs.iter().partition(|p| train_set.contains(&p.object_id));
    let scored = if val.is_empty() { &train } else { &val };
    let val_inputs: Vec<VoxelGrid> = scored.iter().map(|p| p.partial.clone()).collect();
    let val_targets: Vec<&VoxelGrid> = scored.iter().map(|p| &p.complete).collect();

    let problem = Problem {
        inputs: train.iter().map(|p| &p.partial).collect(),
        ids: train.iter().map(|p| p.object_id.clone()).collect(),
        priors: &bank.priors,
    };
    let params = ModelParams::<T>::init(arch.clone())?;
    let trained = optimize(
        params,
        &problem,
        cfg,
        log,
        |i, f| {
            let g = l1_full_with_grad(f, &train[i].complete)?;
            Ok(SampleLoss {
                value: g.value,
                grad: g.grad,
            })
        },
        |_, _| Ok(None),
        |p| mean_iou(p, &val_inputs, &val_targets, bank, cfg.threshold),
    )?;
    Ok(CoslOutcome {
        trained,
        train_objects,
        val_objects,
    })
}

/// Forward plus binarization; the outputs are the coarse shapes for refinement.
pub fn run_cosl_inference<T: Scalar>(
    params: &ModelParams<T>,
    partials: &[VoxelGrid],
    bank: &PriorBank,
    threshold: f64,
) -> Result<Vec<VoxelGrid>> {
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(Error::Config(format!("threshold must lie in (0, 1), got {threshold}")));
    }
    let fields = forward_batch(params, partials, bank)?;
    Ok(fields
        .iter()
        .zip(partials)
        .map(|(f, p)| {
            let mut g = binarize(f, T::of(threshold));
            *g.meta_mut() = p.meta().clone();
            g
        })
        .collect())
}
