//! Flat-kernel mean-shift clustering.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq)]
pub struct ClusterResult<T> {
    pub modes: Vec<Vec<T>>,
    /// Index into `modes` for every input feature.
    pub labels: Vec<usize>,
    pub bandwidth: T,
}

impl<T: Scalar> ClusterResult<T> {
    pub fn cluster_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.modes.len()];
        for &l in &self.labels {
            sizes[l] += 1;
        }
        sizes
    }
}

pub(crate) fn euclidean<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| (x - y) * (x - y))
        .sum::<T>()
        .sqrt()
}

/// Runs mean-shift from every feature as a seed.
pub fn mean_shift<T: Scalar>(
    features: &[Vec<T>],
    bandwidth: T,
    max_iter: usize,
    tol: T,
) -> Result<ClusterResult<T>> {
    let seeds: Vec<usize> = (0..features.len()).collect();
    mean_shift_seeded(features, &seeds, bandwidth, max_iter, tol)
}

/// Mean-shift starting only from `seeds` (indices into `features`).
pub fn mean_shift_seeded<T: Scalar>(
    features: &[Vec<T>],
    seeds: &[usize],
    bandwidth: T,
    max_iter: usize,
    tol: T,
) -> Result<ClusterResult<T>> {
    if features.is_empty() {
        return Err(Error::Domain("mean-shift needs at least one feature".into()));
    }
    if !(bandwidth > T::zero()) || !bandwidth.is_finite() {
        return Err(Error::Domain(format!("bandwidth must be positive, got {bandwidth}")));
    }
    let dim = features[0].len();
    for (i, f) in features.iter().enumerate() {
        if f.len() != dim {
            return Err(Error::Shape(format!("feature {i} has dimension {} != {dim}", f.len())));
        }
        if f.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain(format!("feature {i} is not finite")));
        }
    }

    // (converged point, number of neighbours at convergence)
    let mut converged: Vec<(Vec<T>, usize)> = Vec::with_capacity(seeds.len());
    for &s in seeds {
        let mut point = features[s].clone();
        let mut support = 0;
        for _ in 0..max_iter {
            let mut mean = vec![T::zero(); dim];
            let mut count = 0usize;
            for f in features {
                if euclidean(&point, f) <= bandwidth {
                    count += 1;
                    for (m, &v) in mean.iter_mut().zip(f) {
                        *m += v;
                    }
                }
            }
            if count == 0 {
                break;
            }
            let n = T::of(count as f64);
            mean.iter_mut().for_each(|m| *m /= n);
            let shift = euclidean(&mean, &point);
            point = mean;
            support = count;
            if shift < tol {
                break;
            }
        }
        converged.push((point, support));
    }

    // Densest first; stable sort keeps seed order among equals.
    let mut order: Vec<usize> = (0..converged.len()).collect();
    order.sort_by(|&a, &b| converged[b].1.cmp(&converged[a].1));
    let merge_radius = bandwidth / T::of(2.0);
    let mut modes: Vec<Vec<T>> = Vec::new();
    for i in order {
        let candidate = &converged[i].0;
        if modes.iter().all(|m| euclidean(m, candidate) > merge_radius) {
            modes.push(candidate.clone());
        }
    }

    let labels = features
        .iter()
        .map(|f| nearest(&modes, f))
        .collect();
    Ok(ClusterResult {
        modes,
        labels,
        bandwidth,
    })
}

/// Index of the closest candidate; ties go to the lowest index.
pub(crate) fn nearest<T: Scalar>(candidates: &[Vec<T>], point: &[T]) -> usize {
    let mut best = 0;
    let mut best_d = T::infinity();
    for (i, c) in candidates.iter().enumerate() {
        let d = euclidean(c, point);
        if d < best_d {
            best = i;
            best_d = d;
        }
    }
    best
}
