use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::voxel::check_supported_resolution;

/// Encoder depth; each layer halves the spatial side.
pub const LEVELS: usize = 4;

/// Encoder levels (1-based) whose features go through cross-attention.
pub const ATTENTION_LEVELS: [usize; 3] = [2, 3, 4];

/// Input-encoder kernel size.
pub const ENCODER_KERNEL: usize = 3;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArchConfig {
    pub resolution: usize,
    /// Feature width per encoder level.
    pub channels: [usize; LEVELS],
    /// Prior-encoder kernel sizes per level; one parallel branch per entry.
    pub msl_kernels: [Vec<usize>; LEVELS],
    pub seed: u64,
}

impl ArchConfig {
    pub fn default_msl_kernels() -> [Vec<usize>; LEVELS] {
        [vec![7, 5, 3], vec![5, 3], vec![3], vec![3]]
    }

    pub fn new(resolution: usize) -> Self {
        Self {
            resolution,
            channels: [16, 32, 64, 128],
            msl_kernels: Self::default_msl_kernels(),
            seed: 0,
        }
    }

    /// Small widths for desk-scale experiments.
    pub fn toy(resolution: usize) -> Self {
        Self {
            channels: [8, 16, 32, 32],
            ..Self::new(resolution)
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.resolution == 0 || self.resolution % (1 << LEVELS) != 0 {
            return Err(Error::Config(format!(
                "resolution {} is not divisible by {}",
                self.resolution,
                1 << LEVELS
            )));
        }
        check_supported_resolution(self.resolution)?;
        for (level, (&c, kernels)) in self.channels.iter().zip(&self.msl_kernels).enumerate() {
            if kernels.is_empty() {
                return Err(Error::Config(format!("level {} has no MSL branches", level + 1)));
            }
            if let Some(k) = kernels.iter().find(|&&k| k % 2 == 0) {
                return Err(Error::Config(format!("MSL kernel {k} must be odd")));
            }
            if c < kernels.len() {
                return Err(Error::Config(format!(
                    "level {} width {c} cannot feed {} branches",
                    level + 1,
                    kernels.len()
                )));
            }
        }
        Ok(())
    }

    /// Spatial side of encoder level `level` (1-based).
    pub fn level_side(&self, level: usize) -> usize {
        self.resolution >> level
    }

    /// Output width of each MSL branch at `level` (0-based); widths differ by at most one.
    pub fn branch_widths(&self, level: usize) -> Vec<usize> {
        let c = self.channels[level];
        let nb = self.msl_kernels[level].len();
        (0..nb).map(|b| c / nb + usize::from(b < c % nb)).collect()
    }
}
