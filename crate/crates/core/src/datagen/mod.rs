//! Procedural toy corpus and simulated partial scanning.

mod dataset;
mod scan;
mod shapes;

pub use dataset::{
    gen_toy_dataset, generate_objects, load_manifest, manifest_root, save_manifest, DatasetEntry, DatasetManifest,
    Split, ToyDatasetSpec, ToyObject, MANIFEST_NAME,
};
pub use scan::{add_noise, random_direction, simulate_partial_scan};
pub use shapes::{sample_shape, FAMILIES};
