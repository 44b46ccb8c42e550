use std::fmt::Write as _;

use voxcomplete::voxel::VoxelGrid;

/// "x y z" per occupied voxel centre, in unit-cube coordinates.
pub fn points_text(grid: &VoxelGrid) -> String {
    let n = grid.resolution() as f64;
    let mut out = String::new();
    for [x, y, z] in grid.occupied() {
        let c = |i: usize| (i as f64 + 0.5) / n;
        let _ = writeln!(out, "{} {} {}", c(x), c(y), c(z));
    }
    out
}

const CUBE_FACES: [[usize; 3]; 12] = [
    [0, 2, 1],
    [0, 3, 2],
    [4, 5, 6],
    [4, 6, 7],
    [0, 1, 5],
    [0, 5, 4],
    [1, 2, 6],
    [1, 6, 5],
    [2, 3, 7],
    [2, 7, 6],
    [3, 0, 4],
    [3, 4, 7],
];

/// OBJ mesh with one unwelded cube (8 vertices, 12 triangles) per voxel.
pub fn cubes_obj(grid: &VoxelGrid) -> String {
    let n = grid.resolution() as f64;
    let mut out = String::from("# voxel cubes\n");
    let mut faces = String::new();
    for (k, [x, y, z]) in grid.occupied().enumerate() {
        let (x0, y0, z0) = (x as f64 / n, y as f64 / n, z as f64 / n);
        let s = 1.0 / n;
        for (dx, dy, dz) in [(0., 0., 0.), (s, 0., 0.), (s, s, 0.), (0., s, 0.), (0., 0., s), (s, 0., s), (s, s, s), (0., s, s)] {
            let _ = writeln!(out, "v {} {} {}", x0 + dx, y0 + dy, z0 + dz);
        }
        for [a, b, c] in CUBE_FACES {
            let base = 8 * k + 1;
            let _ = writeln!(faces, "f {} {} {}", base + a, base + b, base + c);
        }
    }
    out.push_str(&faces);
    out
}
