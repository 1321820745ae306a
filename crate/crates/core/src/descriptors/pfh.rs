//! Point Feature Histograms over all point pairs of the support.

use std::f64::consts::PI;

use nalgebra::Vector3;

use super::Context;
use crate::cloud::srgb_to_linear;

pub(super) const BINS: usize = 5;
pub(super) const PFH_DIM: usize = BINS * BINS * BINS;

/// Darboux-frame angles `(theta, alpha, phi)` of an oriented point pair,
/// with the source chosen as the point whose normal makes the smaller angle
/// with the connecting line. `None` for coincident points or a normal
/// parallel to the line.
pub fn pair_features(p1: &Vector3<f64>, n1: &Vector3<f64>, p2: &Vector3<f64>, n2: &Vector3<f64>) -> Option<[f64; 3]> {
    let mut dp = p2 - p1;
    let len = dp.norm();
    if len == 0.0 {
        return None;
    }
    dp /= len;
    let a1 = n1.dot(&dp);
    let a2 = n2.dot(&dp);
    let (ns, nt, phi, dp) = if a1.abs().acos() > a2.abs().acos() {
        (n2, n1, -a2, -dp)
    } else {
        (n1, n2, a1, dp)
    };
    let v = dp.cross(ns);
    let vn = v.norm();
    if vn == 0.0 {
        return None;
    }
    let v = v / vn;
    let w = ns.cross(&v);
    let alpha = v.dot(nt);
    let theta = w.dot(nt).atan2(ns.dot(nt));
    Some([theta, alpha, phi])
}

fn bin(x: f64, lo: f64, hi: f64) -> usize {
    let b = ((x - lo) / (hi - lo) * BINS as f64).floor();
    b.clamp(0.0, (BINS - 1) as f64) as usize
}

pub(super) fn feature_bin(f: &[f64; 3]) -> usize {
    bin(f[0], -PI, PI) + BINS * bin(f[1], -1.0, 1.0) + BINS * BINS * bin(f[2], -1.0, 1.0)
}

/// Per-channel `s / (s + t)` in linear RGB; 0.5 when both are black.
pub(super) fn colour_bin(c1: &[f64; 3], c2: &[f64; 3]) -> usize {
    let mut idx = 0;
    let mut mul = 1;
    for ch in 0..3 {
        let s = srgb_to_linear(c1[ch]);
        let t = srgb_to_linear(c2[ch]);
        let ratio = if s + t > 0.0 { s / (s + t) } else { 0.5 };
        idx += mul * bin(ratio, 0.0, 1.0);
        mul *= BINS;
    }
    idx
}

/// Fills `out` (125 or 250 values) and returns false for an empty support.
pub(super) fn pfh(ctx: &Context, kp: usize, out: &mut [f64], colour: bool) -> bool {
    let cloud = ctx.cloud;
    let points = cloud.points();
    let normals = cloud.normals().unwrap();
    let support: Vec<usize> = ctx
        .index
        .knn(&points[kp], ctx.params.pfh_max_neighbours)
        .into_iter()
        .filter(|nb| nb.dist_sq <= ctx.radii.support * ctx.radii.support && cloud.normal_is_valid(nb.index))
        .map(|nb| nb.index)
        .collect();
    if support.len() < ctx.params.min_support {
        return false;
    }
    let colours = cloud.colours();
    let (geo, rgb) = out.split_at_mut(PFH_DIM);
    let mut pairs = 0usize;
    for (a, &i) in support.iter().enumerate() {
        for &j in &support[a + 1..] {
            let Some(f) = pair_features(&points[i], &normals[i], &points[j], &normals[j]) else {
                continue;
            };
            geo[feature_bin(&f)] += 1.0;
            if colour {
                let c = colours.unwrap();
                rgb[colour_bin(&c[i], &c[j])] += 1.0;
            }
            pairs += 1;
        }
    }
    if pairs == 0 {
        return false;
    }
    let scale = 100.0 / pairs as f64;
    out.iter_mut().for_each(|v| *v *= scale);
    true
}
