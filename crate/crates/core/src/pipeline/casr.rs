use super::config::{Stage, TrainConfig};
use super::log::RunLog;
use super::train::{optimize, Problem, Trained};
use crate::error::{Error, Result};
use crate::losses::{casr_total, casr_total_with_grad, HyperParams, LossComponents};
use crate::network::{forward_batch, ArchConfig, ModelParams, SampleLoss};
use crate::priors::{BankKind, PriorBank};
use crate::scalar::Scalar;
use crate::voxel::{binarize, iou, missing_part, DenseField, VoxelGrid};

#[derive(Clone, Debug)]
pub struct CasrOutcome<T> {
    pub trained: Trained<T>,
    /// Refined fields from the selected parameters, one per object.
    pub refined: Vec<DenseField<T>>,
}

/// Mean over objects of the mean IoU between the prediction and each scan.
pub fn partial_iou(predictions: &[VoxelGrid], partials: &[Vec<VoxelGrid>]) -> Result<f64> {
    if predictions.len() != partials.len() || predictions.is_empty() {
        return Err(Error::Config("partial IoU needs one non-empty scan list per prediction".into()));
    }
    let mut total = 0.0;
    for (p, scans) in predictions.iter().zip(partials) {
        if scans.is_empty() {
            return Err(Error::Config("object without partial scans".into()));
        }
        let mut s = 0.0;
        for scan in scans {
            s += iou(p, scan)?;
        }
        total += s / scans.len() as f64;
    }
    Ok(total / predictions.len() as f64)
}

/// Refines the coarse shapes of one category using only its partial scans.
///
/// Ground-truth complete shapes are not an input; selection uses partial IoU.
pub fn refine_casr<T: Scalar>(
    coarse: &[VoxelGrid],
    partials: &[Vec<VoxelGrid>],
    bank: &PriorBank,
    hp: &HyperParams,
    arch: &ArchConfig,
    cfg: &TrainConfig,
    log: &mut RunLog,
) -> Result<CasrOutcome<T>> {
    if cfg.stage != Stage::Casr {
        return Err(Error::Config("refine_casr needs a casr TrainConfig".into()));
    }
    if bank.kind != BankKind::CategorySpecific {
        return Err(Error::Config("CaSR requires a category-specific prior bank".into()));
    }
    if coarse.is_empty() {
        return Err(Error::Config("empty category".into()));
    }
    if coarse.len() != partials.len() {
        return Err(Error::Config(format!(
            "{} coarse shapes but {} scan lists",
            coarse.len(),
            partials.len()
        )));
    }
    hp.validate()?;
    bank.validate()?;
    let scans: Vec<Vec<VoxelGrid>> = partials
        .iter()
        .map(|s| s.iter().take(cfg.scans_per_object).cloned().collect::<Vec<_>>())
        .collect();
    if scans.iter().any(Vec::is_empty) {
        return Err(Error::Config("object without partial scans".into()));
    }
    let targets: Vec<Vec<VoxelGrid>> = coarse
        .iter()
        .zip(&scans)
        .map(|(c, ss)| ss.iter().map(|s| missing_part(c, s)).collect::<Result<Vec<_>>>())
        .collect::<Result<_>>()?;

    let problem = Problem {
        inputs: coarse.iter().collect(),
        ids: coarse
            .iter()
            .enumerate()
            .map(|(i, c)| c.object_id().map_or_else(|| format!("#{i}"), str::to_string))
            .collect(),
        priors: &bank.priors,
    };
    let params = ModelParams::<T>::init(arch.clone())?;
    let threshold = cfg.threshold;
    let trained = optimize(
        params,
        &problem,
        cfg,
        log,
        |i, f| {
            let mut value = T::zero();
            let mut grad = vec![T::zero(); f.len()];
            for (s, t) in scans[i].iter().zip(&targets[i]) {
                let (g, _) = casr_total_with_grad(f, s, t, hp)?;
                value += g.value;
                for (a, b) in grad.iter_mut().zip(g.grad) {
                    *a += b;
                }
            }
            Ok(SampleLoss { value, grad })
        },
        |i, f| {
            let mut sum = LossComponents::default();
            for (s, t) in scans[i].iter().zip(&targets[i]) {
                sum.accumulate(&casr_total(f, s, t, hp)?.1);
            }
            Ok(Some(sum))
        },
        |p| {
            let preds: Vec<VoxelGrid> = forward_batch(p, coarse, bank)?
                .iter()
                .map(|f| binarize(f, T::of(threshold)))
                .collect();
            partial_iou(&preds, &scans)
        },
    )?;
    let refined = forward_batch(&trained.params, coarse, bank)?;
    Ok(CasrOutcome { trained, refined })
}
