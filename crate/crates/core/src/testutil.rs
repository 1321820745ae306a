//! Shared synthetic clouds for unit tests.

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::cloud::{estimate_normals, PointCloud};

/// Bumpy textured terrain with a box on it, jittered so that no two
/// neighbourhoods are exactly symmetric.
pub fn terrain(seed: u64) -> PointCloud {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pts = Vec::new();
    let mut cols = Vec::new();
    let step = 0.04;
    let n = 50;
    let height = |x: f64, y: f64| {
        let mut z = 0.08 * (3.0 * x).sin() * (2.0 * y + 0.5).cos() + 0.03 * (7.0 * x + 5.0 * y).sin();
        if x.abs() < 0.3 && (y - 0.2).abs() < 0.2 {
            z += 0.25;
        }
        z
    };
    for i in 0..n {
        for j in 0..n {
            let x = -1.0 + i as f64 * step + rng.gen_range(-0.01..0.01);
            let y = -1.0 + j as f64 * step + rng.gen_range(-0.01..0.01);
            pts.push(Vector3::new(x, y, height(x, y) - 3.0));
            let check = ((x * 4.0).floor() + (y * 4.0).floor()).rem_euclid(2.0);
            let g = 0.3 + 0.4 * check + rng.gen_range(0.0..0.2);
            cols.push([g, 0.8 * g, 0.5 + 0.3 * check]);
        }
    }
    // Box walls.
    for k in 1..6 {
        let z = height(0.0, 0.2) - 3.0 - 0.25 + k as f64 * 0.04;
        for i in 0..15 {
            let t = -0.3 + i as f64 * 0.04;
            for (x, y) in [(t, 0.0), (t, 0.4), (-0.3, 0.2 + t * 0.66), (0.3, 0.2 + t * 0.66)] {
                pts.push(Vector3::new(
                    x + rng.gen_range(-0.005..0.005),
                    y + rng.gen_range(-0.005..0.005),
                    z + rng.gen_range(-0.005..0.005),
                ));
                cols.push([0.2, 0.2 + 0.1 * k as f64, 0.3]);
            }
        }
    }
    let cloud = PointCloud::new(pts).unwrap().with_colours(cols).unwrap();
    estimate_normals(&cloud, 0.1, Vector3::zeros())
}

