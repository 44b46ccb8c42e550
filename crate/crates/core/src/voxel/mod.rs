//! Voxel grids, probability fields, file I/O and evaluation metrics.

mod field_io;
mod grid;
mod io;
mod metrics;

pub use field_io::{decode_field, encode_field, load_field, save_field, FIELD_MAGIC};
pub use grid::{check_supported_resolution, DenseField, GridMeta, VoxelGrid, SUPPORTED_RESOLUTIONS};
pub use io::{decode_grid, encode_grid, load_grid, payload_len, save_grid, write_atomic, MAGIC, VERSION};
pub use metrics::{
    binarize, chamfer, f1, iou, missing_part, overlap_count, to_points, union, Confusion, PointSet,
    DEFAULT_THRESHOLD,
};
pub(crate) use metrics::mean_nearest;
