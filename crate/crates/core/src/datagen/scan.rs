use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::voxel::VoxelGrid;

/// Keeps the voxels visible to an orthographic camera looking along `direction`.
///
/// A voxel survives when the ray from its centre towards the camera leaves the
/// grid without entering another occupied voxel.
pub fn simulate_partial_scan(grid: &VoxelGrid, direction: [f64; 3]) -> Result<VoxelGrid> {
    let norm = direction.iter().map(|d| d * d).sum::<f64>().sqrt();
    if !(norm > 0.0) || !norm.is_finite() {
        return Err(Error::Domain(format!("invalid view direction {direction:?}")));
    }
    let toward_camera = direction.map(|d| -d / norm);
    let mut out = VoxelGrid::empty(grid.resolution()).with_meta(grid.meta().clone());
    for c in grid.occupied() {
        if !occluded(grid, c, toward_camera) {
            out.set(c[0], c[1], c[2], true);
        }
    }
    Ok(out)
}

/// Voxel walk (Amanatides and Woo) from the centre of `start` along `dir`.
fn occluded(grid: &VoxelGrid, start: [usize; 3], dir: [f64; 3]) -> bool {
    let n = grid.resolution() as i64;
    let mut cell = start.map(|v| v as i64);
    let mut step = [0i64; 3];
    let mut t_max = [f64::INFINITY; 3];
    let mut t_delta = [f64::INFINITY; 3];
    for a in 0..3 {
        if dir[a] > 0.0 {
            step[a] = 1;
            t_delta[a] = 1.0 / dir[a];
            t_max[a] = 0.5 / dir[a];
        } else if dir[a] < 0.0 {
            step[a] = -1;
            t_delta[a] = -1.0 / dir[a];
            t_max[a] = -0.5 / dir[a];
        }
    }
    loop {
        // ties step the lowest axis first, which keeps the walk deterministic
        let mut axis = 0;
        for a in 1..3 {
            if t_max[a] < t_max[axis] {
                axis = a;
            }
        }
        cell[axis] += step[axis];
        t_max[axis] += t_delta[axis];
        if cell[axis] < 0 || cell[axis] >= n {
            return false;
        }
        if grid.get(cell[0] as usize, cell[1] as usize, cell[2] as usize) {
            return true;
        }
    }
}

/// Uniformly distributed unit vector.
pub fn random_direction(rng: &mut impl Rng) -> [f64; 3] {
    loop {
        let v = [
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0f64),
        ];
        let n2: f64 = v.iter().map(|x| x * x).sum();
        if n2 > 1e-6 && n2 <= 1.0 {
            let n = n2.sqrt();
            return v.map(|x| x / n);
        }
    }
}

/// Switches empty voxels on with probability `min(1, sigma / 10)`; occupied voxels stay.
pub fn add_noise(grid: &VoxelGrid, sigma: f64, seed: u64) -> Result<VoxelGrid> {
    if !(sigma >= 0.0) {
        return Err(Error::Domain(format!("noise sigma must be non-negative, got {sigma}")));
    }
    let p = (sigma / 10.0).min(1.0);
    let mut out = grid.clone();
    if p == 0.0 {
        return Ok(out);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for cell in out.cells_mut() {
        if !*cell && rng.gen_bool(p) {
            *cell = true;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_voxel_is_always_visible() {
        let mut g = VoxelGrid::empty(8);
        g.set(3, 4, 5, true);
        for d in [[0.0, 0.0, -1.0], [1.0, 2.0, 3.0], [-0.3, 0.1, 0.0]] {
            assert_eq!(simulate_partial_scan(&g, d).unwrap(), g);
        }
    }

    #[test]
    fn cube_from_above_keeps_top_layer() {
        let g = VoxelGrid::from_fn(8, |x, y, z| (2..6).contains(&x) && (2..6).contains(&y) && (1..5).contains(&z));
        let s = simulate_partial_scan(&g, [0.0, 0.0, -1.0]).unwrap();
        assert_eq!(s.occupied_count(), 16);
        assert!(s.occupied().all(|c| c[2] == 4));
        let side = simulate_partial_scan(&g, [1.0, 0.0, 0.0]).unwrap();
        assert!(side.occupied().all(|c| c[0] == 2));
    }

    #[test]
    fn empty_and_degenerate_inputs() {
        let e = VoxelGrid::empty(8);
        assert!(simulate_partial_scan(&e, [0.0, 0.0, 1.0]).unwrap().is_vacant());
        assert!(simulate_partial_scan(&e, [0.0, 0.0, 0.0]).is_err());
    }

    #[test]
    fn noise_is_a_superset() {
        let g = VoxelGrid::from_fn(8, |x, _, _| x < 2);
        assert_eq!(add_noise(&g, 0.0, 1).unwrap(), g);
        let noisy = add_noise(&g, 2.0, 1).unwrap();
        assert!(g.is_subset_of(&noisy));
        assert_eq!(noisy, add_noise(&g, 2.0, 1).unwrap());
        assert!(add_noise(&g, -1.0, 1).is_err());
    }
}
