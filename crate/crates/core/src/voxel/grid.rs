use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Resolutions accepted by files, configs and the network.
pub const SUPPORTED_RESOLUTIONS: [usize; 4] = [8, 16, 32, 64];

pub fn check_supported_resolution(n: usize) -> Result<()> {
    if SUPPORTED_RESOLUTIONS.contains(&n) {
        Ok(())
    } else {
        Err(Error::Config(format!(
            "unsupported resolution {n}, expected one of {SUPPORTED_RESOLUTIONS:?}"
        )))
    }
}

/// Optional provenance attached to a grid.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridMeta {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub object_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub category: Option<String>,
}

impl GridMeta {
    pub fn is_empty(&self) -> bool {
        self.object_id.is_none() && self.category.is_none()
    }
}

/// Dense binary occupancy cube. Cell `(x, y, z)` lives at `x + n*y + n*n*z`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VoxelGrid {
    resolution: usize,
    cells: Vec<bool>,
    meta: GridMeta,
}

impl VoxelGrid {
    pub fn empty(resolution: usize) -> Self {
        assert!(resolution > 0, "resolution must be positive");
        Self {
            resolution,
            cells: vec![false; resolution.pow(3)],
            meta: GridMeta::default(),
        }
    }

    pub fn full(resolution: usize) -> Self {
        let mut grid = Self::empty(resolution);
        grid.cells.fill(true);
        grid
    }

    pub fn from_cells(resolution: usize, cells: Vec<bool>) -> Result<Self> {
        if resolution == 0 || cells.len() != resolution.pow(3) {
            return Err(Error::Shape(format!(
                "{} cells do not form a {resolution}^3 grid",
                cells.len()
            )));
        }
        Ok(Self {
            resolution,
            cells,
            meta: GridMeta::default(),
        })
    }

    pub fn from_fn(resolution: usize, mut f: impl FnMut(usize, usize, usize) -> bool) -> Self {
        let mut grid = Self::empty(resolution);
        for z in 0..resolution {
            for y in 0..resolution {
                for x in 0..resolution {
                    let i = grid.index(x, y, z);
                    grid.cells[i] = f(x, y, z);
                }
            }
        }
        grid
    }

    pub fn with_meta(mut self, meta: GridMeta) -> Self {
        self.meta = meta;
        self
    }

    pub fn meta(&self) -> &GridMeta {
        &self.meta
    }

    pub fn meta_mut(&mut self) -> &mut GridMeta {
        &mut self.meta
    }

    pub fn object_id(&self) -> Option<&str> {
        self.meta.object_id.as_deref()
    }

    #[inline]
    pub fn resolution(&self) -> usize {
        self.resolution
    }

    /// Total number of cells, `n^3`.
    #[inline]
    pub fn len(&self) -> usize {
        self.cells.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize, z: usize) -> usize {
        debug_assert!(x < self.resolution && y < self.resolution && z < self.resolution);
        x + self.resolution * (y + self.resolution * z)
    }

    #[inline]
    pub fn coords(&self, index: usize) -> [usize; 3] {
        let n = self.resolution;
        [index % n, (index / n) % n, index / (n * n)]
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, z: usize) -> bool {
        self.cells[self.index(x, y, z)]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, z: usize, value: bool) {
        let i = self.index(x, y, z);
        self.cells[i] = value;
    }

    pub fn cells(&self) -> &[bool] {
        &self.cells
    }

    pub fn cells_mut(&mut self) -> &mut [bool] {
        &mut self.cells
    }

    pub fn occupied_count(&self) -> usize {
        self.cells.iter().filter(|&&c| c).count()
    }

    /// True when no cell is occupied.
    pub fn is_vacant(&self) -> bool {
        !self.cells.iter().any(|&c| c)
    }

    pub fn occupied(&self) -> impl Iterator<Item = [usize; 3]> + '_ {
        self.cells
            .iter()
            .enumerate()
            .filter(|(_, &c)| c)
            .map(|(i, _)| self.coords(i))
    }

    pub fn is_subset_of(&self, other: &VoxelGrid) -> bool {
        self.resolution == other.resolution
            && self.cells.iter().zip(&other.cells).all(|(&a, &b)| !a || b)
    }

    /// Inclusive min/max corner of the occupied cells.
    pub fn bounding_box(&self) -> Option<([usize; 3], [usize; 3])> {
        let mut lo = [usize::MAX; 3];
        let mut hi = [0usize; 3];
        let mut any = false;
        for c in self.occupied() {
            any = true;
            for a in 0..3 {
                lo[a] = lo[a].min(c[a]);
                hi[a] = hi[a].max(c[a]);
            }
        }
        any.then_some((lo, hi))
    }

    /// Occupancy as 0/1 scalars, in memory order.
    pub fn to_scalars<T: Scalar>(&self) -> Vec<T> {
        self.cells
            .iter()
            .map(|&c| if c { T::one() } else { T::zero() })
            .collect()
    }
}

/// Per-voxel occupancy probabilities in `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseField<T> {
    resolution: usize,
    values: Vec<T>,
}

impl<T: Scalar> DenseField<T> {
    pub fn constant(resolution: usize, value: T) -> Result<Self> {
        Self::from_values(resolution, vec![value; resolution.pow(3)])
    }

    pub fn from_values(resolution: usize, values: Vec<T>) -> Result<Self> {
        if resolution == 0 || values.len() != resolution.pow(3) {
            return Err(Error::Shape(format!(
                "{} values do not form a {resolution}^3 field",
                values.len()
            )));
        }
        if let Some(bad) = values
            .iter()
            .find(|v| !(**v >= T::zero() && **v <= T::one()))
        {
            return Err(Error::Domain(format!("field value {bad} outside [0, 1]")));
        }
        Ok(Self { resolution, values })
    }

    /// Skips the range check; callers guarantee `values` lie in `[0, 1]`.
    pub(crate) fn from_values_unchecked(resolution: usize, values: Vec<T>) -> Self {
        debug_assert_eq!(values.len(), resolution.pow(3));
        Self { resolution, values }
    }

    pub fn from_grid(grid: &VoxelGrid) -> Self {
        Self::from_values_unchecked(grid.resolution(), grid.to_scalars())
    }

    #[inline]
    pub fn resolution(&self) -> usize {
        self.resolution
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.values.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    pub fn sum(&self) -> T {
        self.values.iter().copied().sum()
    }

    pub fn max_abs_diff(&self, other: &Self) -> T {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (*a - *b).abs())
            .fold(T::zero(), T::max)
    }
}
