//! Difference-of-Gaussians extrema of surface point density.
//!
//! Octave `o` works on every `4^o`-th point (by index) and covers scales
//! `σ0·2^(o + s/S)` for `s = 0..S+3`. A point is a keypoint when one of its
//! inner DoG levels is a strict extremum over its spatial neighbourhood at
//! the same and adjacent levels.

use std::f64::consts::PI;

use super::DetectorParams;
use crate::cloud::{PointCloud, SpatialIndex};

pub(super) fn sift_saliency(cloud: &PointCloud, params: &DetectorParams, res: f64) -> Vec<Option<f64>> {
    let sigma0 = params.sift_min_scale.resolve(res);
    let s_count = params.sift_scales;
    let levels = s_count + 3;
    let mut best: Vec<Option<f64>> = vec![None; cloud.len()];
    let mut buf = Vec::new();

    for octave in 0..params.sift_octaves {
        let stride = 4usize.pow(octave as u32);
        let members: Vec<usize> = (0..cloud.len()).step_by(stride).collect();
        if members.len() < params.min_neighbours.max(4) {
            break;
        }
        let pts: Vec<_> = members.iter().map(|&i| cloud.points()[i]).collect();
        let index = SpatialIndex::new(&pts);
        let sigmas: Vec<f64> = (0..levels)
            .map(|s| sigma0 * 2f64.powf(octave as f64 + s as f64 / s_count as f64))
            .collect();
        let reach = 3.0 * sigmas[levels - 1];

        // density[level][k]
        let mut density = vec![vec![0.0; pts.len()]; levels];
        for (k, p) in pts.iter().enumerate() {
            index.radius_into(p, reach, &mut buf);
            for (level, sigma) in sigmas.iter().enumerate() {
                let cut = (3.0 * sigma) * (3.0 * sigma);
                let inv = 1.0 / (2.0 * sigma * sigma);
                let sum: f64 = buf
                    .iter()
                    .take_while(|nb| nb.dist_sq <= cut)
                    .map(|nb| (-nb.dist_sq * inv).exp())
                    .sum();
                density[level][k] = sum * stride as f64 / (2.0 * PI * sigma * sigma);
            }
        }
        let dog: Vec<Vec<f64>> = (0..levels - 1)
            .map(|l| density[l + 1].iter().zip(&density[l]).map(|(a, b)| a - b).collect())
            .collect();

        for level in 1..=s_count {
            let radius = sigmas[level];
            for (k, p) in pts.iter().enumerate() {
                let v = dog[level][k];
                if v.abs() <= params.sift_min_contrast || v == 0.0 {
                    continue;
                }
                index.radius_into(p, radius, &mut buf);
                if buf.len() < params.min_neighbours {
                    continue;
                }
                let is_max = buf.iter().all(|nb| {
                    (level - 1..=level + 1).all(|l| (nb.index == k && l == level) || dog[l][nb.index] < v)
                });
                let is_min = !is_max
                    && buf.iter().all(|nb| {
                        (level - 1..=level + 1).all(|l| (nb.index == k && l == level) || dog[l][nb.index] > v)
                    });
                if is_max || is_min {
                    let slot = &mut best[members[k]];
                    *slot = Some(slot.map_or(v.abs(), |b: f64| b.max(v.abs())));
                }
            }
        }
    }
    best
}
