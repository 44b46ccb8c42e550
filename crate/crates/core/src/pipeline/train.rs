use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::adam::Adam;
use super::config::{Stage, TrainConfig};
use super::log::{RunLog, StepRecord};
use crate::error::{Error, Result};
use crate::losses::LossComponents;
use crate::network::{batch_gradient, save_checkpoint, ModelParams, SampleLoss};
use crate::scalar::Scalar;
use crate::voxel::{DenseField, VoxelGrid};

pub(crate) const SNAPSHOT_NAME: &str = "last_good.ckpt";

/// Parameters chosen by validation, with the training trajectory summary.
#[derive(Clone, Debug)]
pub struct Trained<T> {
    pub params: ModelParams<T>,
    pub best_epoch: usize,
    pub best_score: f64,
    pub steps: usize,
    /// `(epoch, score)` for every validation pass.
    pub history: Vec<(usize, f64)>,
}

pub(crate) struct Problem<'a> {
    pub inputs: Vec<&'a VoxelGrid>,
    pub ids: Vec<String>,
    pub priors: &'a [VoxelGrid],
}

/// Mini-batch Adam over `problem.inputs`, keeping the parameters with the best
/// `evaluate` score (first one wins on ties).
pub(crate) fn optimize<T, L, C, E>(
    mut params: ModelParams<T>,
    problem: &Problem<'_>,
    cfg: &TrainConfig,
    log: &mut RunLog,
    loss: L,
    components: C,
    mut evaluate: E,
) -> Result<Trained<T>>
where
    T: Scalar,
    L: Fn(usize, &DenseField<T>) -> Result<SampleLoss<T>> + Sync,
    C: Fn(usize, &DenseField<T>) -> Result<Option<LossComponents>>,
    E: FnMut(&ModelParams<T>) -> Result<f64>,
{
    cfg.validate()?;
    let n = problem.inputs.len();
    if n == 0 {
        return Err(Error::Config("no training samples".into()));
    }
    let mut adam = Adam::<T>::from_config(params.len(), cfg);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..n).collect();
    let mut best: Option<(ModelParams<T>, usize, f64)> = None;
    let mut history = Vec::new();
    let mut step = 0usize;
    let mut current = 0usize;
    let mut scored_at: Option<usize> = None;

    'epochs: for epoch in 0..cfg.epochs {
        current = epoch;
        let lr = cfg.lr_at(epoch);
        order.shuffle(&mut rng);
        for batch in order.chunks(cfg.batch_size) {
            if cfg.max_steps.is_some_and(|m| step >= m) {
                break 'epochs;
            }
            let inputs: Vec<&VoxelGrid> = batch.iter().map(|&i| problem.inputs[i]).collect();
            let out = batch_gradient(&params, &inputs, problem.priors, |k, f| loss(batch[k], f))?;
            if !out.loss.is_finite() || out.gradient.iter().any(|g| !g.is_finite()) {
                return Err(diverged(&params, problem, batch, cfg.stage, epoch, step, log));
            }
            let mut parts: Option<LossComponents> = None;
            for (&i, f) in batch.iter().zip(&out.fields) {
                if let Some(c) = components(i, f)? {
                    parts.get_or_insert_with(LossComponents::default).accumulate(&c);
                }
            }
            adam.step(params.values_mut(), &out.gradient, lr);
            let mut record = StepRecord {
                stage: Some(cfg.stage),
                step,
                epoch,
                lr,
                total: Some(out.loss.as_f64()),
                ..StepRecord::default()
            };
            if let Some(mut c) = parts {
                let inv = 1.0 / batch.len() as f64;
                c.partial *= inv;
                c.occupancy *= inv;
                c.variance *= inv;
                c.coarse *= inv;
                c.total *= inv;
                record = record.with_components(&c);
            }
            log.push(record)?;
            step += 1;
        }
        if (epoch + 1) % cfg.eval_every == 0 {
            validate_into(&params, epoch, step, cfg, log, &mut evaluate, &mut best, &mut history)?;
            scored_at = Some(step);
        }
    }
    if scored_at != Some(step) {
        validate_into(&params, current, step, cfg, log, &mut evaluate, &mut best, &mut history)?;
    }
    let (params, best_epoch, best_score) = best.expect("at least one validation pass");
    log.flush()?;
    Ok(Trained {
        params,
        best_epoch,
        best_score,
        steps: step,
        history,
    })
}

#[allow(clippy::too_many_arguments)]
fn validate_into<T: Scalar, E: FnMut(&ModelParams<T>) -> Result<f64>>(
    params: &ModelParams<T>,
    epoch: usize,
    step: usize,
    cfg: &TrainConfig,
    log: &mut RunLog,
    evaluate: &mut E,
    best: &mut Option<(ModelParams<T>, usize, f64)>,
    history: &mut Vec<(usize, f64)>,
) -> Result<()> {
    let score = evaluate(params)?;
    let improved = best.as_ref().map_or(true, |b| score > b.2);
    if improved {
        *best = Some((params.clone(), epoch, score));
    }
    history.push((epoch, score));
    let mut record = StepRecord {
        stage: Some(cfg.stage),
        step,
        epoch,
        lr: cfg.lr_at(epoch),
        best: improved,
        ..StepRecord::default()
    };
    match cfg.stage {
        Stage::Cosl => record.val_iou = Some(score),
        Stage::Casr => record.partial_iou = Some(score),
    }
    log::info!("{:?} epoch {epoch} step {step}: score {score:.4}", cfg.stage);
    log.push(record)
}

fn diverged<T: Scalar>(
    params: &ModelParams<T>,
    problem: &Problem<'_>,
    batch: &[usize],
    stage: Stage,
    epoch: usize,
    step: usize,
    log: &RunLog,
) -> Error {
    let ids: Vec<&str> = batch.iter().map(|&i| problem.ids[i].as_str()).collect();
    let mut context = format!("{stage:?} epoch {epoch} step {step}, batch [{}]", ids.join(", "));
    if let Some(dir) = &log.snapshot_dir {
        let path = dir.join(SNAPSHOT_NAME);
        match save_checkpoint(params, &path) {
            Ok(()) => context.push_str(&format!("; last good parameters in {}", path.display())),
            Err(e) => context.push_str(&format!("; snapshot failed: {e}")),
        }
    }
    Error::NonFinite { context }
}
