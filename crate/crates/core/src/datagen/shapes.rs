//! Parameterized toy solids. Coordinates are in the unit cube with `z` up.

use rand::Rng;

use crate::voxel::VoxelGrid;

pub const FAMILIES: [&str; 4] = ["table", "lamp", "basket", "bench"];

#[derive(Clone, Copy, Debug)]
enum Solid {
    /// Axis-aligned box `[lo, hi]`.
    Box([f64; 3], [f64; 3]),
    /// Vertical cylinder: centre (x, y), radius, z range.
    Cylinder([f64; 2], f64, [f64; 2]),
    /// Vertical tube with inner and outer radius.
    Tube([f64; 2], f64, f64, [f64; 2]),
}

impl Solid {
    fn contains(&self, p: [f64; 3]) -> bool {
        match *self {
            Solid::Box(lo, hi) => (0..3).all(|a| p[a] >= lo[a] && p[a] <= hi[a]),
            Solid::Cylinder(c, r, z) => {
                let d2 = (p[0] - c[0]).powi(2) + (p[1] - c[1]).powi(2);
                d2 <= r * r && p[2] >= z[0] && p[2] <= z[1]
            }
            Solid::Tube(c, inner, outer, z) => {
                let d2 = (p[0] - c[0]).powi(2) + (p[1] - c[1]).powi(2);
                d2 <= outer * outer && d2 >= inner * inner && p[2] >= z[0] && p[2] <= z[1]
            }
        }
    }
}

fn legs(out: &mut Vec<Solid>, x: [f64; 2], y: [f64; 2], thick: f64, top: f64) {
    for &lx in &x {
        for &ly in &y {
            out.push(Solid::Box([lx, ly, 0.0], [lx + thick, ly + thick, top]));
        }
    }
}

fn table(rng: &mut impl Rng) -> Vec<Solid> {
    let half_x = rng.gen_range(0.28..0.42);
    let half_y = rng.gen_range(0.22..0.40);
    let height = rng.gen_range(0.45..0.75);
    let slab = rng.gen_range(0.07..0.13);
    let leg = rng.gen_range(0.07..0.12);
    let (x0, x1) = (0.5 - half_x, 0.5 + half_x);
    let (y0, y1) = (0.5 - half_y, 0.5 + half_y);
    let mut s = vec![Solid::Box([x0, y0, height - slab], [x1, y1, height])];
    legs(&mut s, [x0, x1 - leg], [y0, y1 - leg], leg, height);
    s
}

fn lamp(rng: &mut impl Rng) -> Vec<Solid> {
    let base_r = rng.gen_range(0.15..0.25);
    let pole_r = rng.gen_range(0.04..0.07);
    let height = rng.gen_range(0.6..0.9);
    let shade_r = rng.gen_range(0.18..0.32);
    let shade_h = rng.gen_range(0.15..0.28);
    let c = [0.5, 0.5];
    vec![
        Solid::Cylinder(c, base_r, [0.0, 0.07]),
        Solid::Cylinder(c, pole_r, [0.0, height]),
        Solid::Tube(c, shade_r - 0.09, shade_r, [height - shade_h, height]),
    ]
}

fn basket(rng: &mut impl Rng) -> Vec<Solid> {
    let half_x = rng.gen_range(0.22..0.40);
    let half_y = rng.gen_range(0.22..0.40);
    let height = rng.gen_range(0.3..0.6);
    let wall = rng.gen_range(0.07..0.11);
    let (x0, x1) = (0.5 - half_x, 0.5 + half_x);
    let (y0, y1) = (0.5 - half_y, 0.5 + half_y);
    vec![
        Solid::Box([x0, y0, 0.0], [x1, y1, wall]),
        Solid::Box([x0, y0, 0.0], [x0 + wall, y1, height]),
        Solid::Box([x1 - wall, y0, 0.0], [x1, y1, height]),
        Solid::Box([x0, y0, 0.0], [x1, y0 + wall, height]),
        Solid::Box([x0, y1 - wall, 0.0], [x1, y1, height]),
    ]
}

fn bench(rng: &mut impl Rng) -> Vec<Solid> {
    let half_x = rng.gen_range(0.32..0.45);
    let half_y = rng.gen_range(0.12..0.22);
    let seat = rng.gen_range(0.3..0.45);
    let slab = rng.gen_range(0.07..0.11);
    let back = rng.gen_range(0.2..0.4);
    let leg = rng.gen_range(0.07..0.11);
    let (x0, x1) = (0.5 - half_x, 0.5 + half_x);
    let (y0, y1) = (0.5 - half_y, 0.5 + half_y);
    let mut s = vec![
        Solid::Box([x0, y0, seat - slab], [x1, y1, seat]),
        Solid::Box([x0, y1 - slab, seat], [x1, y1, seat + back]),
    ];
    legs(&mut s, [x0, x1 - leg], [y0, y1 - leg], leg, seat);
    s
}

/// Samples one shape of `family` and rasterizes it at voxel centres.
pub fn sample_shape(family: &str, resolution: usize, rng: &mut impl Rng) -> Option<VoxelGrid> {
    let solids = match family {
        "table" => table(rng),
        "lamp" => lamp(rng),
        "basket" => basket(rng),
        "bench" => bench(rng),
        _ => return None,
    };
    let n = resolution as f64;
    Some(VoxelGrid::from_fn(resolution, |x, y, z| {
        let p = [(x as f64 + 0.5) / n, (y as f64 + 0.5) / n, (z as f64 + 0.5) / n];
        solids.iter().any(|s| s.contains(p))
    }))
}
