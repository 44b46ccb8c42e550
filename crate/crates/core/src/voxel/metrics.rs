//! Set operations on grids and the evaluation metrics (IoU, F1, Chamfer).

use rayon::prelude::*;

use super::grid::{DenseField, VoxelGrid};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Default evaluation threshold for turning probabilities into occupancy.
pub const DEFAULT_THRESHOLD: f64 = 0.5;

fn same_resolution(a: &VoxelGrid, b: &VoxelGrid) -> Result<()> {
    if a.resolution() != b.resolution() {
        return Err(Error::Shape(format!(
            "resolution {} vs {}",
            a.resolution(),
            b.resolution()
        )));
    }
    Ok(())
}

/// Occupied iff `value >= threshold`.
pub fn binarize<T: Scalar>(field: &DenseField<T>, threshold: T) -> VoxelGrid {
    let cells = field.values().iter().map(|&v| v >= threshold).collect();
    VoxelGrid::from_cells(field.resolution(), cells).expect("field is a cube")
}

/// `|a ∧ b|`.
pub fn overlap_count(a: &VoxelGrid, b: &VoxelGrid) -> Result<usize> {
    same_resolution(a, b)?;
    Ok(a.cells()
        .iter()
        .zip(b.cells())
        .filter(|(&x, &y)| x && y)
        .count())
}

pub fn union(a: &VoxelGrid, b: &VoxelGrid) -> Result<VoxelGrid> {
    same_resolution(a, b)?;
    let cells = a.cells().iter().zip(b.cells()).map(|(&x, &y)| x || y).collect();
    VoxelGrid::from_cells(a.resolution(), cells)
}

/// Cells of `coarse` not covered by `partial`.
pub fn missing_part(coarse: &VoxelGrid, partial: &VoxelGrid) -> Result<VoxelGrid> {
    same_resolution(coarse, partial)?;
    let cells = coarse
        .cells()
        .iter()
        .zip(partial.cells())
        .map(|(&c, &p)| c && !p)
        .collect();
    VoxelGrid::from_cells(coarse.resolution(), cells)
}

/// Intersection over union; two empty grids score 1.
pub fn iou(a: &VoxelGrid, b: &VoxelGrid) -> Result<f64> {
    same_resolution(a, b)?;
    let (mut inter, mut uni) = (0usize, 0usize);
    for (&x, &y) in a.cells().iter().zip(b.cells()) {
        inter += (x && y) as usize;
        uni += (x || y) as usize;
    }
    if uni == 0 {
        return Ok(1.0);
    }
    Ok(inter as f64 / uni as f64)
}

/// Confusion counts over occupied voxels.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
}

impl Confusion {
    pub fn of(pred: &VoxelGrid, gt: &VoxelGrid) -> Result<Self> {
        same_resolution(pred, gt)?;
        let mut c = Confusion::default();
        for (&p, &g) in pred.cells().iter().zip(gt.cells()) {
            match (p, g) {
                (true, true) => c.tp += 1,
                (true, false) => c.fp += 1,
                (false, true) => c.fn_ += 1,
                (false, false) => {}
            }
        }
        Ok(c)
    }

    pub fn f1(&self) -> f64 {
        if self.tp == 0 {
            return 0.0;
        }
        let precision = self.tp as f64 / (self.tp + self.fp) as f64;
        let recall = self.tp as f64 / (self.tp + self.fn_) as f64;
        2.0 * precision * recall / (precision + recall)
    }
}

/// Harmonic mean of voxel precision and recall; 0 when nothing is hit.
pub fn f1(pred: &VoxelGrid, gt: &VoxelGrid) -> Result<f64> {
    Ok(Confusion::of(pred, gt)?.f1())
}

/// Points in the unit cube.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PointSet<T> {
    pub points: Vec<[T; 3]>,
}

impl<T: Scalar> PointSet<T> {
    pub fn new(points: Vec<[T; 3]>) -> Self {
        Self { points }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn centroid(&self) -> Option<[T; 3]> {
        if self.points.is_empty() {
            return None;
        }
        let n = T::of(self.points.len() as f64);
        let mut c = [T::zero(); 3];
        for p in &self.points {
            for a in 0..3 {
                c[a] += p[a];
            }
        }
        Some(c.map(|v| v / n))
    }
}

/// One point per occupied voxel, at the voxel centre scaled to `[0, 1]^3`.
pub fn to_points<T: Scalar>(grid: &VoxelGrid) -> PointSet<T> {
    let n = T::of(grid.resolution() as f64);
    let half = T::of(0.5);
    let points = grid
        .occupied()
        .map(|c| c.map(|i| (T::of(i as f64) + half) / n))
        .collect();
    PointSet { points }
}

#[inline]
pub(crate) fn distance<T: Scalar>(a: &[T; 3], b: &[T; 3]) -> T {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    let dz = a[2] - b[2];
    (dx * dx + dy * dy + dz * dz).sqrt()
}

/// Mean over `from` of the distance to the nearest point of `to`.
pub(crate) fn mean_nearest<T: Scalar>(from: &PointSet<T>, to: &PointSet<T>) -> T {
    let mins: Vec<T> = from
        .points
        .par_iter()
        .map(|p| {
            to.points
                .iter()
                .map(|q| distance(p, q))
                .fold(T::infinity(), T::min)
        })
        .collect();
    // sequential sum keeps the reduction order fixed
    let total: T = mins.iter().copied().sum();
    total / T::of(from.len() as f64)
}

/// Symmetric Chamfer distance (mean Euclidean, averaged over both directions).
pub fn chamfer<T: Scalar>(a: &PointSet<T>, b: &PointSet<T>) -> Result<T> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Domain("chamfer distance of an empty point set".into()));
    }
    Ok(T::of(0.5) * (mean_nearest(a, b) + mean_nearest(b, a)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid_with(n: usize, cells: &[[usize; 3]]) -> VoxelGrid {
        let mut g = VoxelGrid::empty(n);
        for c in cells {
            g.set(c[0], c[1], c[2], true);
        }
        g
    }

    #[test]
    fn binarize_boundary_is_inclusive() {
        let f = DenseField::constant(2, 0.5f64).unwrap();
        assert_eq!(binarize(&f, 0.5).occupied_count(), 8);
        let f = DenseField::constant(2, 0.9f64).unwrap();
        assert_eq!(binarize(&f, 0.5).occupied_count(), 8);
        let mut values = vec![0.0f64; 8];
        values[0] = 0.2;
        values[1] = 0.7;
        let g = binarize(&DenseField::from_values(2, values).unwrap(), 0.5);
        assert_eq!(&g.cells()[..2], &[false, true]);
    }

    #[test]
    fn iou_examples() {
        let a = grid_with(8, &[[0, 0, 0], [1, 0, 0]]);
        let b = grid_with(8, &[[0, 0, 0], [1, 0, 0], [5, 5, 5], [7, 7, 7]]);
        assert_eq!(iou(&a, &a).unwrap(), 1.0);
        assert_eq!(iou(&a, &b).unwrap(), 0.5);
        let c = grid_with(8, &[[3, 3, 3]]);
        assert_eq!(iou(&a, &c).unwrap(), 0.0);
        assert_eq!(iou(&VoxelGrid::empty(8), &VoxelGrid::empty(8)).unwrap(), 1.0);
        assert!(matches!(
            iou(&a, &VoxelGrid::empty(16)),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn f1_examples() {
        let gt = grid_with(8, &[[0, 0, 0], [1, 0, 0]]);
        let pred = grid_with(8, &[[0, 0, 0], [1, 0, 0], [2, 0, 0], [3, 0, 0]]);
        assert!((f1(&pred, &gt).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(f1(&gt, &gt).unwrap(), 1.0);
        assert_eq!(f1(&VoxelGrid::empty(8), &gt).unwrap(), 0.0);
    }

    #[test]
    fn points_are_voxel_centres() {
        let g = grid_with(8, &[[0, 0, 0]]);
        assert_eq!(to_points::<f64>(&g).points, vec![[0.0625; 3]]);
        assert!(to_points::<f64>(&VoxelGrid::empty(8)).is_empty());
        let full = to_points::<f64>(&VoxelGrid::full(2));
        assert_eq!(full.len(), 8);
        assert_eq!(full.centroid().unwrap(), [0.5; 3]);
    }

    #[test]
    fn chamfer_examples() {
        let a = PointSet::new(vec![[0.0f64, 0.0, 0.0]]);
        let b = PointSet::new(vec![[0.3f64, 0.4, 0.0]]);
        assert!((chamfer(&a, &b).unwrap() - 0.5).abs() < 1e-15);
        assert_eq!(chamfer(&a, &a).unwrap(), 0.0);
        assert!(matches!(
            chamfer(&a, &PointSet::default()),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn chamfer_of_one_voxel_shift() {
        // one-voxel-thick plane: every point's nearest neighbour is its shifted copy
        let a = VoxelGrid::from_fn(8, |x, _, _| x == 3);
        let b = VoxelGrid::from_fn(8, |x, _, _| x == 4);
        let cd = chamfer(&to_points::<f64>(&a), &to_points::<f64>(&b)).unwrap();
        assert!((cd - 0.125).abs() < 1e-9, "{cd}");
    }

    #[test]
    fn set_operations() {
        let a = grid_with(8, &[[0, 0, 0], [1, 1, 1]]);
        let e = VoxelGrid::empty(8);
        assert_eq!(union(&a, &e).unwrap(), a);
        assert_eq!(union(&a, &a).unwrap(), a);
        assert_eq!(overlap_count(&a, &a).unwrap(), 2);
        assert_eq!(overlap_count(&a, &e).unwrap(), 0);

        let mut coarse = a.clone();
        for x in 2..7 {
            coarse.set(x, 0, 0, true);
        }
        assert_eq!(missing_part(&coarse, &a).unwrap().occupied_count(), 5);
        assert!(missing_part(&a, &a).unwrap().is_vacant());
        let d = grid_with(8, &[[4, 4, 4]]);
        assert_eq!(missing_part(&d, &a).unwrap(), d);
    }
}
