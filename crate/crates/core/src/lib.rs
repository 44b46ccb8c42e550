//! Weakly-supervised voxel shape completion for unseen categories.
//!
//! A coarse completion network attends from a partial scan to a bank of
//! complete prior shapes; a second, self-supervised stage refines the coarse
//! output per category using only partial scans and category-specific priors.

pub mod datagen;
pub mod error;
pub mod losses;
pub mod network;
pub mod pipeline;
pub mod priors;
pub mod scalar;
pub mod voxel;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type DenseField32 = voxel::DenseField<f32>;
pub type DenseField64 = voxel::DenseField<f64>;
pub type PointSet32 = voxel::PointSet<f32>;
pub type PointSet64 = voxel::PointSet<f64>;
pub type Model32 = network::ModelParams<f32>;
pub type Model64 = network::ModelParams<f64>;
pub type Volume32 = network::Volume<f32>;
pub type Volume64 = network::Volume<f64>;
