use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::{Stage, TrainConfig};
use crate::datagen::ToyDatasetSpec;
use crate::error::{Error, Result};
use crate::losses::HyperParams;
use crate::network::{ArchConfig, LEVELS};
use crate::priors::DEFAULT_BANK_SIZE;

pub const RESOLVED_CONFIG_NAME: &str = "resolved_config.json";

/// Every knob of a run; its JSON snapshot reproduces the run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub dataset: ToyDatasetSpec,
    pub arch: ArchConfig,
    pub seen_bank_size: usize,
    pub category_bank_size: usize,
    pub cosl: TrainConfig,
    pub casr: TrainConfig,
    pub hp: HyperParams,
    /// Binarization threshold for coarse shapes and final outputs.
    pub threshold: f64,
}

impl RunConfig {
    /// Paper-scale defaults at resolution `n`.
    pub fn new(n: usize) -> Self {
        Self {
            dataset: ToyDatasetSpec::new(n.clamp(16, 32), 10, 4, 0),
            arch: ArchConfig::new(n),
            seen_bank_size: DEFAULT_BANK_SIZE,
            category_bank_size: DEFAULT_BANK_SIZE,
            cosl: TrainConfig::cosl(),
            casr: TrainConfig::casr(),
            hp: HyperParams::default(),
            threshold: 0.5,
        }
    }

    /// Small corpus, narrow network and few epochs.
    pub fn toy(n: usize) -> Self {
        let mut c = Self::new(n);
        c.dataset.per_category = 6;
        c.arch = ArchConfig::toy(n);
        c.seen_bank_size = 8;
        c.category_bank_size = 3;
        c.cosl.epochs = 20;
        c.cosl.decay_every = 10;
        c.casr.epochs = 20;
        c.casr.decay_every = 10;
        c.casr.lr = 1e-3;
        c
    }

    pub fn validate(&self) -> Result<()> {
        self.dataset.validate()?;
        self.arch.validate()?;
        if self.arch.resolution != self.dataset.resolution {
            return Err(Error::Config(format!(
                "network resolution {} differs from dataset resolution {}",
                self.arch.resolution, self.dataset.resolution
            )));
        }
        if self.seen_bank_size == 0 || self.category_bank_size == 0 {
            return Err(Error::Config("bank sizes must be positive".into()));
        }
        if self.cosl.stage != Stage::Cosl || self.casr.stage != Stage::Casr {
            return Err(Error::Config("stage configs are swapped".into()));
        }
        self.cosl.validate()?;
        self.casr.validate()?;
        self.hp.validate()?;
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return Err(Error::Config(format!("threshold must lie in (0, 1), got {}", self.threshold)));
        }
        Ok(())
    }

    /// Sets every seed.
    pub fn set_seed(&mut self, seed: u64) {
        self.dataset.seed = seed;
        self.arch.seed = seed;
        self.cosl.seed = seed;
        self.casr.seed = seed;
    }

    pub fn set_resolution(&mut self, n: usize) {
        self.dataset.resolution = n;
        self.arch.resolution = n;
    }

    /// Applies one `key=value` setting. Training keys may be prefixed with
    /// `cosl.` or `casr.`; unprefixed they apply to both stages.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let bad = |what: &str| Error::Config(format!("{key}: cannot parse {value:?} as {what}"));
        let float = || value.trim().parse::<f64>().map_err(|_| bad("a number"));
        let int = || value.trim().parse::<usize>().map_err(|_| bad("a non-negative integer"));
        let list = || -> Vec<String> {
            value.split(',').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect()
        };
        let (stages, field): (Vec<Stage>, &str) = match key.split_once('.') {
            Some(("cosl", f)) => (vec![Stage::Cosl], f),
            Some(("casr", f)) => (vec![Stage::Casr], f),
            Some(_) => return Err(Error::Config(format!("unknown config key {key:?}"))),
            None => (vec![Stage::Cosl, Stage::Casr], key),
        };
        let prefixed = stages.len() == 1;
        match field {
            "batch_size" | "epochs" | "lr" | "decay" | "decay_every" | "val_fraction" | "eval_every" | "max_steps"
            | "beta1" | "beta2" | "adam_epsilon" => {
                for s in stages {
                    let t = match s {
                        Stage::Cosl => &mut self.cosl,
                        Stage::Casr => &mut self.casr,
                    };
                    match field {
                        "batch_size" => t.batch_size = int()?,
                        "epochs" => t.epochs = int()?,
                        "lr" => t.lr = float()?,
                        "decay" => t.decay = float()?,
                        "decay_every" => t.decay_every = int()?,
                        "val_fraction" => t.val_fraction = float()?,
                        "eval_every" => t.eval_every = int()?,
                        "max_steps" => t.max_steps = if value.trim() == "none" { None } else { Some(int()?) },
                        "beta1" => t.beta1 = float()?,
                        "beta2" => t.beta2 = float()?,
                        _ => t.adam_epsilon = float()?,
                    }
                }
            }
            "scans_per_object" => {
                let v = int()?;
                for s in &stages {
                    match s {
                        Stage::Cosl => self.cosl.scans_per_object = v,
                        Stage::Casr => self.casr.scans_per_object = v,
                    }
                }
                if !prefixed {
                    self.dataset.scans_per_object = v;
                }
            }
            _ if prefixed => return Err(Error::Config(format!("unknown config key {key:?}"))),
            "seed" => self.set_seed(value.trim().parse().map_err(|_| bad("an unsigned integer"))?),
            "resolution" => self.set_resolution(int()?),
            "per_category" => self.dataset.per_category = int()?,
            "categories" => self.dataset.categories = list(),
            "unseen" => self.dataset.unseen = list(),
            "noise_sigma" => self.dataset.noise_sigma = float()?,
            "channels" => {
                let v: Vec<usize> = list()
                    .iter()
                    .map(|s| s.parse().map_err(|_| bad("a channel list")))
                    .collect::<Result<_>>()?;
                self.arch.channels = v.try_into().map_err(|_| bad("four channel widths"))?;
            }
            "msl_kernels" => {
                let levels: Vec<Vec<usize>> = value
                    .split(';')
                    .map(|l| {
                        l.split(',')
                            .map(|k| k.trim().parse().map_err(|_| bad("kernel lists like 7,5,3;5,3;3;3")))
                            .collect::<Result<Vec<usize>>>()
                    })
                    .collect::<Result<_>>()?;
                if levels.len() != LEVELS {
                    return Err(bad("four kernel lists"));
                }
                self.arch.msl_kernels = levels.try_into().expect("length checked");
            }
            "bank_size" | "seen_bank_size" => self.seen_bank_size = int()?,
            "category_bank_size" => self.category_bank_size = int()?,
            "alpha" => self.hp.alpha = float()?,
            "gamma1" => self.hp.gamma1 = float()?,
            "gamma2" => self.hp.gamma2 = float()?,
            "lambda" | "lambda_m" => self.hp.lambda_m = float()?,
            "var_epsilon" => self.hp.var_epsilon = float()?,
            "threshold" => {
                self.threshold = float()?;
                self.cosl.threshold = self.threshold;
                self.casr.threshold = self.threshold;
            }
            _ => return Err(Error::Config(format!("unknown config key {key:?}"))),
        }
        Ok(())
    }

    /// Applies a `key=value` overlay; blank lines and `#` comments are skipped.
    pub fn apply_overlay(&mut self, text: &str) -> Result<()> {
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("overlay line {}: expected key=value, got {line:?}", n + 1)))?;
            self.set(k.trim(), v)?;
        }
        Ok(())
    }

    pub fn apply_overlay_file(&mut self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        self.apply_overlay(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        crate::voxel::write_atomic(path.as_ref(), self.to_json().as_bytes())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_slice(&bytes).map_err(|e| Error::json(path, e))
    }
}
