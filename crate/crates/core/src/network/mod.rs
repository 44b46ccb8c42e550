//! The completion network: partial-input encoder, multi-scale prior
//! encoder, cross-attention fusion and hierarchical decoder.

mod attention;
mod checkpoint;
mod config;
mod model;
mod ops;
mod params;
mod volume;

pub use attention::{cross_attention, AttentionOutput};
pub use checkpoint::{decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint};
pub use config::{ArchConfig, ATTENTION_LEVELS, ENCODER_KERNEL, LEVELS};
pub use model::{
    batch_gradient, decode, decode_probabilities, encode_partial, encode_prior_grids, encode_priors, forward,
    forward_batch, forward_with_priors, BatchGradient, FeaturePyramid, SampleLoss,
};
pub use ops::{ConvOp, LEAK};
pub use params::{ConvSlot, ModelParams, ParamLayout};
pub use volume::Volume;
