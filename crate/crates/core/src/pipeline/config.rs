use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    /// Coarse completion supervised by seen-category ground truth.
    Cosl,
    /// Category-specific refinement from partial scans only.
    Casr,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub stage: Stage,
    pub batch_size: usize,
    pub epochs: usize,
    /// Initial learning rate.
    pub lr: f64,
    /// Multiplicative decay applied every `decay_every` epochs.
    pub decay: f64,
    pub decay_every: usize,
    pub seed: u64,
    /// Partial scans per object used by the matching loss.
    pub scans_per_object: usize,
    /// Fraction of objects held out for validation (CoSL only).
    pub val_fraction: f64,
    /// Validate every this many epochs (and after the last one).
    pub eval_every: usize,
    /// Stop after this many optimizer steps.
    pub max_steps: Option<usize>,
    pub threshold: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_epsilon: f64,
}

impl TrainConfig {
    pub fn cosl() -> Self {
        Self {
            stage: Stage::Cosl,
            batch_size: 10,
            epochs: 120,
            lr: 1e-3,
            decay: 0.5,
            decay_every: 50,
            seed: 0,
            scans_per_object: 4,
            val_fraction: 0.1,
            eval_every: 1,
            max_steps: None,
            threshold: 0.5,
            beta1: 0.9,
            beta2: 0.999,
            adam_epsilon: 1e-8,
        }
    }

    pub fn casr() -> Self {
        Self {
            stage: Stage::Casr,
            lr: 1e-4,
            val_fraction: 0.0,
            ..Self::cosl()
        }
    }

    pub fn for_stage(stage: Stage) -> Self {
        match stage {
            Stage::Cosl => Self::cosl(),
            Stage::Casr => Self::casr(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(format!("{m} ({self:?})")));
        if self.batch_size == 0 || self.epochs == 0 || self.decay_every == 0 || self.eval_every == 0 {
            return bad("batch_size, epochs, decay_every and eval_every must be positive");
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return bad("learning rate must be positive");
        }
        if !(self.decay > 0.0 && self.decay <= 1.0) {
            return bad("decay must lie in (0, 1]");
        }
        if self.scans_per_object == 0 {
            return bad("scans_per_object must be positive");
        }
        if !(0.0..1.0).contains(&self.val_fraction) {
            return bad("val_fraction must lie in [0, 1)");
        }
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return bad("threshold must lie in (0, 1)");
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) || !(self.adam_epsilon > 0.0) {
            return bad("invalid Adam coefficients");
        }
        Ok(())
    }

    /// `lr * decay^floor(epoch / decay_every)`.
    pub fn lr_at(&self, epoch: usize) -> f64 {
        self.lr * self.decay.powi((epoch / self.decay_every) as i32)
    }
}
