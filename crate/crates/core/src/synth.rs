//! Seeded synthetic scenes for tests, benchmarks and demos.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::tokenizer::voxel_superpoints;
use crate::types::{PointCloud, SuperpointPartition};

/// A cloud with per-point superpoint labels (no sentinels).
#[derive(Debug, Clone)]
pub struct SyntheticScene {
    pub cloud: PointCloud,
    pub labels: Vec<i64>,
}

struct Face {
    origin: [f64; 3],
    u: [f64; 3],
    v: [f64; 3],
    color: [f64; 3],
}

impl Face {
    fn area(&self) -> f64 {
        norm(cross(self.u, self.v))
    }

    fn normal(&self) -> [f64; 3] {
        let n = cross(self.u, self.v);
        let l = norm(n);
        [n[0] / l, n[1] / l, n[2] / l]
    }
}

fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

fn norm(a: [f64; 3]) -> f64 {
    (a[0] * a[0] + a[1] * a[1] + a[2] * a[2]).sqrt()
}

fn box_faces(lo: [f64; 3], hi: [f64; 3], color: [f64; 3], out: &mut Vec<Face>) {
    let [x0, y0, z0] = lo;
    let [x1, y1, z1] = hi;
    let (dx, dy, dz) = (x1 - x0, y1 - y0, z1 - z0);
    let faces = [
        ([x0, y0, z1], [dx, 0.0, 0.0], [0.0, dy, 0.0]),
        ([x0, y0, z0], [0.0, 0.0, dz], [dx, 0.0, 0.0]),
        ([x0, y1, z0], [dx, 0.0, 0.0], [0.0, 0.0, dz]),
        ([x0, y0, z0], [0.0, dy, 0.0], [0.0, 0.0, dz]),
        ([x1, y0, z0], [0.0, 0.0, dz], [0.0, dy, 0.0]),
    ];
    for (origin, u, v) in faces {
        out.push(Face { origin, u, v, color });
    }
}

/// An open-ceiling room (floor and four walls) with box furniture. Features
/// are RGB in [0, 1] followed by unit normals; labels are 0.5 m patches of
/// each face.
pub fn room_scene(n: usize, seed: u64) -> SyntheticScene {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (w, d, h) = (6.0, 5.0, 3.0);
    let mut faces = vec![
        Face { origin: [0.0, 0.0, 0.0], u: [w, 0.0, 0.0], v: [0.0, d, 0.0], color: [0.55, 0.45, 0.35] },
        Face { origin: [0.0, 0.0, 0.0], u: [0.0, 0.0, h], v: [w, 0.0, 0.0], color: [0.85, 0.85, 0.8] },
        Face { origin: [0.0, d, 0.0], u: [w, 0.0, 0.0], v: [0.0, 0.0, h], color: [0.8, 0.82, 0.85] },
        Face { origin: [0.0, 0.0, 0.0], u: [0.0, d, 0.0], v: [0.0, 0.0, h], color: [0.75, 0.8, 0.75] },
        Face { origin: [w, 0.0, 0.0], u: [0.0, 0.0, h], v: [0.0, d, 0.0], color: [0.8, 0.75, 0.75] },
    ];
    for _ in 0..8 {
        let size = [rng.random_range(0.4..1.6), rng.random_range(0.4..1.2), rng.random_range(0.4..1.2)];
        let x = rng.random_range(0.1..w - size[0] - 0.1);
        let y = rng.random_range(0.1..d - size[1] - 0.1);
        let color = [rng.random::<f64>(), rng.random::<f64>(), rng.random::<f64>()];
        box_faces([x, y, 0.0], [x + size[0], y + size[1], size[2]], color, &mut faces);
    }

    let areas: Vec<f64> = faces.iter().map(Face::area).collect();
    let total: f64 = areas.iter().sum();
    let noise = Normal::new(0.0, 0.004).unwrap();
    let tint = Normal::new(0.0, 0.03).unwrap();
    let patch = 0.5;
    let mut positions = Array2::zeros((n, 3));
    let mut features = Array2::zeros((n, 6));
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let mut target = rng.random::<f64>() * total;
        let mut fi = 0;
        while fi + 1 < faces.len() && target >= areas[fi] {
            target -= areas[fi];
            fi += 1;
        }
        let f = &faces[fi];
        let (s, t) = (rng.random::<f64>(), rng.random::<f64>());
        let nrm = f.normal();
        for a in 0..3 {
            positions[[i, a]] = f.origin[a] + s * f.u[a] + t * f.v[a] + noise.sample(&mut rng);
            features[[i, a]] = (f.color[a] + tint.sample(&mut rng)).clamp(0.0, 1.0);
            features[[i, 3 + a]] = nrm[a];
        }
        let pu = (s * norm(f.u) / patch) as i64;
        let pv = (t * norm(f.v) / patch) as i64;
        labels.push(fi as i64 * 10_000 + pu * 100 + pv);
    }
    SyntheticScene {
        cloud: PointCloud::new(positions, features).expect("finite by construction"),
        labels,
    }
}

/// Voxel edge that gives about 32 points per occupied voxel for `n` uniform
/// points in the unit cube.
pub fn cube_cell(n: usize) -> f64 {
    (32.0 / n as f64).cbrt()
}

/// `n` uniform points in the unit cube with random colors, segmented into
/// voxels of edge [`cube_cell`].
pub fn cube_scene(n: usize, seed: u64) -> (PointCloud, SuperpointPartition) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let positions = Array2::from_shape_fn((n, 3), |_| rng.random::<f64>());
    let features = Array2::from_shape_fn((n, 3), |_| rng.random::<f64>());
    let cloud = PointCloud::new(positions, features).expect("finite by construction");
    let part = voxel_superpoints(&cloud, cube_cell(n)).expect("positive cell");
    (cloud, part)
}
