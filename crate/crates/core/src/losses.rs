//! Training objectives over a predicted occupancy field `O`.
//!
//! Every differentiable loss comes in two forms: a plain value function and a
//! `*_with_grad` variant that also returns `dL/dO` in grid memory order.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::voxel::{mean_nearest, DenseField, PointSet, VoxelGrid};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HyperParams {
    /// Occupancy target multiplier: `H = alpha * |S|`.
    pub alpha: f64,
    /// Weight of the occupancy loss.
    pub gamma1: f64,
    /// Weight of the variance loss.
    pub gamma2: f64,
    /// Weight of the coarse-shape loss.
    pub lambda_m: f64,
    /// Floor added to the variance before inverting.
    pub var_epsilon: f64,
}

impl Default for HyperParams {
    fn default() -> Self {
        Self {
            alpha: 2.5,
            gamma1: 1e-5,
            gamma2: 1e-4,
            lambda_m: 0.5,
            var_epsilon: 1e-8,
        }
    }
}

impl HyperParams {
    pub fn validate(&self) -> Result<()> {
        let ok = self.alpha > 0.0
            && self.gamma1 >= 0.0
            && self.gamma2 >= 0.0
            && self.lambda_m >= 0.0
            && self.var_epsilon > 0.0
            && [self.alpha, self.gamma1, self.gamma2, self.lambda_m, self.var_epsilon]
                .iter()
                .all(|v| v.is_finite());
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid hyperparameters {self:?}")))
        }
    }
}

/// A loss value together with its gradient w.r.t. `O`.
#[derive(Clone, Debug, PartialEq)]
pub struct Graded<T> {
    pub value: T,
    pub grad: Vec<T>,
}

fn check<T: Scalar>(o: &DenseField<T>, g: &VoxelGrid) -> Result<()> {
    if o.resolution() != g.resolution() {
        return Err(Error::Shape(format!(
            "field resolution {} vs grid {}",
            o.resolution(),
            g.resolution()
        )));
    }
    Ok(())
}

#[inline]
fn sign<T: Scalar>(v: T) -> T {
    if v > T::zero() {
        T::one()
    } else if v < T::zero() {
        -T::one()
    } else {
        T::zero()
    }
}

#[inline]
fn bit<T: Scalar>(b: bool) -> T {
    if b {
        T::one()
    } else {
        T::zero()
    }
}

/// `(1/N^3) sum |O - G|`.
pub fn l1_full<T: Scalar>(o: &DenseField<T>, g: &VoxelGrid) -> Result<T> {
    check(o, g)?;
    let s: T = o
        .values()
        .iter()
        .zip(g.cells())
        .map(|(&v, &c)| (v - bit(c)).abs())
        .sum();
    Ok(s / T::of(o.len() as f64))
}

pub fn l1_full_with_grad<T: Scalar>(o: &DenseField<T>, g: &VoxelGrid) -> Result<Graded<T>> {
    let value = l1_full(o, g)?;
    let inv = T::one() / T::of(o.len() as f64);
    let grad = o
        .values()
        .iter()
        .zip(g.cells())
        .map(|(&v, &c)| sign(v - bit(c)) * inv)
        .collect();
    Ok(Graded { value, grad })
}

/// L1 restricted to the occupied cells of `mask`, normalized by `N^3`.
fn masked_l1<T: Scalar>(o: &DenseField<T>, mask: &VoxelGrid) -> Result<Graded<T>> {
    check(o, mask)?;
    let inv = T::one() / T::of(o.len() as f64);
    let mut total = T::zero();
    let mut grad = vec![T::zero(); o.len()];
    for (i, (&v, &m)) in o.values().iter().zip(mask.cells()).enumerate() {
        if m {
            // target equals the mask value, 1
            total += (v - T::one()).abs();
            grad[i] = sign(v - T::one()) * inv;
        }
    }
    Ok(Graded {
        value: total * inv,
        grad,
    })
}

/// Partial L1: mismatch counted only where the partial scan is occupied.
pub fn partial_l1<T: Scalar>(o: &DenseField<T>, s: &VoxelGrid) -> Result<T> {
    Ok(masked_l1(o, s)?.value)
}

pub fn partial_l1_with_grad<T: Scalar>(o: &DenseField<T>, s: &VoxelGrid) -> Result<Graded<T>> {
    masked_l1(o, s)
}

/// Occupancy target `H = alpha * |S|`.
pub fn occupancy_target(s: &VoxelGrid, alpha: f64) -> f64 {
    alpha * s.occupied_count() as f64
}

/// `|sum O - alpha |S||`.
pub fn occupancy_loss<T: Scalar>(o: &DenseField<T>, s: &VoxelGrid, alpha: f64) -> Result<T> {
    check(o, s)?;
    if !(alpha > 0.0) {
        return Err(Error::Config(format!("alpha must be positive, got {alpha}")));
    }
    if s.is_vacant() {
        log::warn!("occupancy loss on an empty partial scan; target is 0");
    }
    Ok((o.sum() - T::of(occupancy_target(s, alpha))).abs())
}

/// Subgradient 0 at the kink.
pub fn occupancy_loss_with_grad<T: Scalar>(o: &DenseField<T>, s: &VoxelGrid, alpha: f64) -> Result<Graded<T>> {
    let value = occupancy_loss(o, s, alpha)?;
    let d = sign(o.sum() - T::of(occupancy_target(s, alpha)));
    Ok(Graded {
        value,
        grad: vec![d; o.len()],
    })
}

/// Population variance of the field values.
pub fn field_variance<T: Scalar>(o: &DenseField<T>) -> T {
    let n = T::of(o.len() as f64);
    let mean = o.sum() / n;
    o.values().iter().map(|&v| (v - mean) * (v - mean)).sum::<T>() / n
}

/// `1 / (var(O) + epsilon)`.
pub fn variance_loss<T: Scalar>(o: &DenseField<T>, epsilon: f64) -> T {
    T::one() / (field_variance(o) + T::of(epsilon))
}

pub fn variance_loss_with_grad<T: Scalar>(o: &DenseField<T>, epsilon: f64) -> Graded<T> {
    let n = T::of(o.len() as f64);
    let mean = o.sum() / n;
    let var = field_variance(o);
    let denom = var + T::of(epsilon);
    let value = T::one() / denom;
    let scale = -T::of(2.0) / (n * denom * denom);
    let grad = o.values().iter().map(|&v| scale * (v - mean)).collect();
    Graded { value, grad }
}

/// Per-term breakdown of the refinement objective, for logging.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LossComponents {
    pub partial: f64,
    pub occupancy: f64,
    pub variance: f64,
    pub coarse: f64,
    pub total: f64,
}

impl LossComponents {
    pub fn accumulate(&mut self, other: &LossComponents) {
        self.partial += other.partial;
        self.occupancy += other.occupancy;
        self.variance += other.variance;
        self.coarse += other.coarse;
        self.total += other.total;
    }
}

fn axpy<T: Scalar>(acc: &mut [T], w: T, g: &[T]) {
    for (a, &b) in acc.iter_mut().zip(g) {
        *a += w * b;
    }
}

/// `L_p + gamma1 L_s + gamma2 L_v`.
pub fn vpm_loss<T: Scalar>(o: &DenseField<T>, s: &VoxelGrid, hp: &HyperParams) -> Result<(T, LossComponents)> {
    hp.validate()?;
    let lp = partial_l1(o, s)?;
    let ls = occupancy_loss(o, s, hp.alpha)?;
    let lv = variance_loss(o, hp.var_epsilon);
    let total = lp + T::of(hp.gamma1) * ls + T::of(hp.gamma2) * lv;
    Ok((
        total,
        LossComponents {
            partial: lp.as_f64(),
            occupancy: ls.as_f64(),
            variance: lv.as_f64(),
            coarse: 0.0,
            total: total.as_f64(),
        },
    ))
}

pub fn vpm_loss_with_grad<T: Scalar>(o: &DenseField<T>, s: &VoxelGrid, hp: &HyperParams) -> Result<Graded<T>> {
    let (value, _) = vpm_loss(o, s, hp)?;
    let mut grad = partial_l1_with_grad(o, s)?.grad;
    axpy(&mut grad, T::of(hp.gamma1), &occupancy_loss_with_grad(o, s, hp.alpha)?.grad);
    axpy(&mut grad, T::of(hp.gamma2), &variance_loss_with_grad(o, hp.var_epsilon).grad);
    Ok(Graded { value, grad })
}

/// Partial L1 against the missing part `T` of the coarse shape; zero when `T` is empty.
pub fn coarse_loss<T: Scalar>(o: &DenseField<T>, t: &VoxelGrid) -> Result<T> {
    Ok(masked_l1(o, t)?.value)
}

pub fn coarse_loss_with_grad<T: Scalar>(o: &DenseField<T>, t: &VoxelGrid) -> Result<Graded<T>> {
    masked_l1(o, t)
}

/// `L_VPM + lambda L_m`.
pub fn casr_total<T: Scalar>(
    o: &DenseField<T>,
    s: &VoxelGrid,
    t: &VoxelGrid,
    hp: &HyperParams,
) -> Result<(T, LossComponents)> {
    let (vpm, mut parts) = vpm_loss(o, s, hp)?;
    let lm = coarse_loss(o, t)?;
    let total = vpm + T::of(hp.lambda_m) * lm;
    parts.coarse = lm.as_f64();
    parts.total = total.as_f64();
    Ok((total, parts))
}

pub fn casr_total_with_grad<T: Scalar>(
    o: &DenseField<T>,
    s: &VoxelGrid,
    t: &VoxelGrid,
    hp: &HyperParams,
) -> Result<(Graded<T>, LossComponents)> {
    let (value, parts) = casr_total(o, s, t, hp)?;
    let mut grad = vpm_loss_with_grad(o, s, hp)?.grad;
    axpy(&mut grad, T::of(hp.lambda_m), &coarse_loss_with_grad(o, t)?.grad);
    Ok((Graded { value, grad }, parts))
}

/// One-directional Chamfer term: mean distance from each input point to the prediction.
pub fn point_partial_match<T: Scalar>(p_in: &PointSet<T>, p: &PointSet<T>) -> Result<T> {
    if p_in.is_empty() || p.is_empty() {
        return Err(Error::Domain("partial matching on an empty point set".into()));
    }
    Ok(mean_nearest(p_in, p))
}
