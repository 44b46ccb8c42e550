use std::ops::Range;

use rand::distributions::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use super::config::{ArchConfig, ENCODER_KERNEL, LEVELS};
use super::ops::ConvOp;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Location of one convolution's weights and bias in the flat parameter vector.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConvSlot {
    pub name: String,
    pub op: ConvOp,
    pub weight: Range<usize>,
    pub bias: Range<usize>,
}

/// Encoder layer as a set of parallel branches whose outputs are concatenated.
pub type EncoderLayer = Vec<ConvSlot>;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ParamLayout {
    pub input_encoder: Vec<EncoderLayer>,
    pub prior_encoder: Vec<EncoderLayer>,
    pub decoder: Vec<ConvSlot>,
    pub total: usize,
}

impl ParamLayout {
    pub fn new(config: &ArchConfig) -> Self {
        let mut offset = 0;
        let mut slot = |name: String, op: ConvOp| {
            let w = offset..offset + op.weight_len();
            offset = w.end;
            let b = offset..offset + op.out_ch;
            offset = b.end;
            ConvSlot {
                name,
                op,
                weight: w,
                bias: b,
            }
        };
        let c = config.channels;
        let in_width = |level: usize| if level == 0 { 1 } else { c[level - 1] };

        let input_encoder = (0..LEVELS)
            .map(|l| {
                vec![slot(
                    format!("input_encoder.{l}"),
                    ConvOp::conv(in_width(l), c[l], ENCODER_KERNEL),
                )]
            })
            .collect();
        let prior_encoder = (0..LEVELS)
            .map(|l| {
                config.msl_kernels[l]
                    .iter()
                    .zip(config.branch_widths(l))
                    .enumerate()
                    .map(|(b, (&k, w))| slot(format!("prior_encoder.{l}.k{k}.{b}"), ConvOp::conv(in_width(l), w, k)))
                    .collect()
            })
            .collect();
        let decoder = vec![
            slot("decoder.0".into(), ConvOp::deconv(c[3], c[2])),
            slot("decoder.1".into(), ConvOp::deconv(2 * c[2], c[1])),
            slot("decoder.2".into(), ConvOp::deconv(2 * c[1], c[0])),
            slot("decoder.3".into(), ConvOp::deconv(c[0], 2)),
        ];
        Self {
            input_encoder,
            prior_encoder,
            decoder,
            total: offset,
        }
    }

    pub fn slots(&self) -> impl Iterator<Item = &ConvSlot> {
        self.input_encoder
            .iter()
            .flatten()
            .chain(self.prior_encoder.iter().flatten())
            .chain(&self.decoder)
    }

    /// `(name, range, shape)` for every tensor, in storage order.
    pub fn tensors(&self) -> Vec<(String, Range<usize>, Vec<usize>)> {
        let mut out = Vec::new();
        for s in self.slots() {
            let k = s.op.kernel;
            out.push((
                format!("{}.weight", s.name),
                s.weight.clone(),
                vec![s.op.out_ch, s.op.in_ch, k, k, k],
            ));
            out.push((format!("{}.bias", s.name), s.bias.clone(), vec![s.op.out_ch]));
        }
        out
    }
}

/// All learnable tensors, stored contiguously.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams<T> {
    config: ArchConfig,
    layout: ParamLayout,
    values: Vec<T>,
}

impl<T: Scalar> ModelParams<T> {
    /// He-uniform weights (bound `sqrt(6 / fan_in)`) and zero biases,
    /// deterministic in `config.seed`.
    pub fn init(config: ArchConfig) -> Result<Self> {
        config.validate()?;
        let layout = ParamLayout::new(&config);
        let mut values = vec![T::zero(); layout.total];
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        for slot in layout.slots() {
            let bound = (6.0 / slot.op.fan_in() as f64).sqrt();
            let dist = Uniform::new_inclusive(-bound, bound);
            for v in &mut values[slot.weight.clone()] {
                *v = T::of(dist.sample(&mut rng));
            }
        }
        Ok(Self { config, layout, values })
    }

    pub fn from_values(config: ArchConfig, values: Vec<T>) -> Result<Self> {
        config.validate()?;
        let layout = ParamLayout::new(&config);
        if values.len() != layout.total {
            return Err(Error::Shape(format!(
                "{} parameter values, config expects {}",
                values.len(),
                layout.total
            )));
        }
        Ok(Self { config, layout, values })
    }

    pub fn config(&self) -> &ArchConfig {
        &self.config
    }

    pub fn layout(&self) -> &ParamLayout {
        &self.layout
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [T] {
        &mut self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub(crate) fn weight(&self, slot: &ConvSlot) -> &[T] {
        &self.values[slot.weight.clone()]
    }

    pub(crate) fn bias(&self, slot: &ConvSlot) -> &[T] {
        &self.values[slot.bias.clone()]
    }

    /// SHA-256 over the little-endian `f64` image of every parameter.
    pub fn checksum(&self) -> String {
        let mut h = Sha256::new();
        for v in &self.values {
            h.update(v.as_f64().to_le_bytes());
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Same parameters in another scalar type.
    pub fn cast<U: Scalar>(&self) -> ModelParams<U> {
        ModelParams {
            config: self.config.clone(),
            layout: self.layout.clone(),
            values: self.values.iter().map(|v| U::of(v.as_f64())).collect(),
        }
    }
}
