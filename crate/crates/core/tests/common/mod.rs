#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use voxcomplete::priors::{BankKind, PriorBank};
use voxcomplete::voxel::{GridMeta, VoxelGrid};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_grid(rng: &mut impl Rng, n: usize, density: f64) -> VoxelGrid {
    VoxelGrid::from_fn(n, |_, _, _| rng.gen_bool(density))
}

pub fn tagged(grid: VoxelGrid, id: &str) -> VoxelGrid {
    grid.with_meta(GridMeta {
        object_id: Some(id.to_owned()),
        category: None,
    })
}

/// Random bank of `m` priors, labelled as seen-category.
pub fn random_bank(rng: &mut impl Rng, n: usize, m: usize) -> PriorBank {
    let priors: Vec<VoxelGrid> = (0..m).map(|_| random_grid(rng, n, 0.3)).collect();
    PriorBank {
        source_ids: (0..m).map(|i| vec![format!("p{i}")]).collect(),
        priors,
        kind: BankKind::SeenCategory,
        requested: m,
        fallback: false,
        bandwidth: None,
    }
}

/// Gradients smaller than this are compared on an absolute scale.
pub const GRAD_FLOOR: f64 = 1e-8;

/// Floor for end-to-end parameter checks: a loss averaged over 16^3 voxels
/// leaves about 1e-11 of roundoff in a finite difference at step 1e-4.
pub const PARAM_GRAD_FLOOR: f64 = 1e-7;

/// `|a - n| / max(|a|, |n|, GRAD_FLOOR)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    relative_error_above(analytic, numeric, GRAD_FLOOR)
}

pub fn relative_error_above(analytic: f64, numeric: f64, floor: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(floor)
}

/// Fourth-order central difference of `f` at `x` along coordinate `i`.
pub fn five_point_difference(f: impl Fn(&[f64]) -> f64, x: &[f64], i: usize, h: f64) -> f64 {
    let at = |d: f64| {
        let mut xp = x.to_vec();
        xp[i] += d;
        f(&xp)
    };
    (at(-2.0 * h) - 8.0 * at(-h) + 8.0 * at(h) - at(2.0 * h)) / (12.0 * h)
}

/// Central difference of `f` at `x` along coordinate `i`.
pub fn central_difference(f: impl Fn(&[f64]) -> f64, x: &[f64], i: usize, h: f64) -> f64 {
    let mut xp = x.to_vec();
    xp[i] += h;
    let mut xm = x.to_vec();
    xm[i] -= h;
    (f(&xp) - f(&xm)) / (2.0 * h)
}

/// Smallest configuration that exercises every pipeline stage.
pub fn tiny_run_config(seed: u64) -> voxcomplete::pipeline::RunConfig {
    let mut c = voxcomplete::pipeline::RunConfig::toy(16);
    c.set_seed(seed);
    c.dataset.per_category = 3;
    c.dataset.scans_per_object = 2;
    c.seen_bank_size = 2;
    c.category_bank_size = 2;
    for t in [&mut c.cosl, &mut c.casr] {
        t.epochs = 2;
        t.batch_size = 4;
        t.scans_per_object = 2;
    }
    c
}

/// Moves zero-initialized biases off zero so no activation sits exactly on the
/// leaky-ReLU kink, where finite differences average the two slopes.
pub fn jitter_biases(params: &mut voxcomplete::Model64, rng: &mut impl Rng) {
    let layout = params.layout().clone();
    let slots = layout
        .input_encoder
        .iter()
        .chain(&layout.prior_encoder)
        .flatten()
        .chain(&layout.decoder);
    for slot in slots {
        for i in slot.bias.clone() {
            params.values_mut()[i] = rng.gen_range(-0.05..0.05);
        }
    }
}
