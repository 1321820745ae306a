use std::collections::HashMap;

use nalgebra::Vector3;

use super::{PointCloud, Rgb};

pub type VoxelKey = [i64; 3];

pub fn voxel_key(p: &Vector3<f64>, grid: f64) -> VoxelKey {
    [
        (p.x / grid).floor() as i64,
        (p.y / grid).floor() as i64,
        (p.z / grid).floor() as i64,
    ]
}

#[derive(Default)]
struct Accumulator {
    count: usize,
    position: Vector3<f64>,
    normal: Vector3<f64>,
    colour: [f64; 3],
}

/// One point per occupied voxel, at the centroid of its members.
///
/// Normals are averaged over valid member normals and renormalized; voxels
/// with no valid member normal get an invalid (zero) normal. Output is
/// ordered by voxel key.
pub fn voxel_downsample(cloud: &PointCloud, grid: f64) -> PointCloud {
    assert!(grid > 0.0, "voxel grid must be positive");
    let mut cells: HashMap<VoxelKey, Accumulator> = HashMap::new();
    let normals = cloud.normals();
    let colours = cloud.colours();
    for (i, p) in cloud.points().iter().enumerate() {
        let acc = cells.entry(voxel_key(p, grid)).or_default();
        acc.count += 1;
        acc.position += p;
        if let Some(ns) = normals {
            acc.normal += ns[i];
        }
        if let Some(cs) = colours {
            for c in 0..3 {
                acc.colour[c] += cs[i][c];
            }
        }
    }
    let mut keys: Vec<VoxelKey> = cells.keys().copied().collect();
    keys.sort_unstable();

    let mut points = Vec::with_capacity(keys.len());
    let mut out_normals = normals.map(|_| Vec::with_capacity(keys.len()));
    let mut out_colours = colours.map(|_| Vec::with_capacity(keys.len()));
    for key in keys {
        let acc = &cells[&key];
        let n = acc.count as f64;
        points.push(acc.position / n);
        if let Some(ns) = out_normals.as_mut() {
            let norm = acc.normal.norm();
            ns.push(if norm > 1e-12 {
                acc.normal / norm
            } else {
                super::INVALID_NORMAL
            });
        }
        if let Some(cs) = out_colours.as_mut() {
            let c: Rgb = [acc.colour[0] / n, acc.colour[1] / n, acc.colour[2] / n];
            cs.push(c.map(|v| v.clamp(0.0, 1.0)));
        }
    }
    PointCloud::from_parts_unchecked(points, out_normals, out_colours)
}
