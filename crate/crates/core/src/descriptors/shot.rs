//! Signatures of Histograms of Orientations, with the optional colour part.
//!
//! The support sphere is split by the local reference frame into 8
//! azimuth × 2 elevation × 2 radial volumes. Each volume holds an 11-bin
//! histogram of the cosine between the frame's z axis and the neighbour
//! normal; the colour variant appends a 31-bin histogram per volume of the
//! CIELab L1 distance to the keypoint colour. Contributions are spread
//! linearly over adjacent bins in every dimension.

use std::f64::consts::PI;

use nalgebra::Vector3;

use super::{local_reference_frame, Context};
use crate::cloud::{srgb_to_linear, Rgb};

const AZIMUTH: usize = 8;
const ELEVATION: usize = 2;
const RADIAL: usize = 2;
const VOLUMES: usize = AZIMUTH * ELEVATION * RADIAL;
const COS_BINS: usize = 11;
const COLOUR_BINS: usize = 31;
pub(super) const SHOT_DIM: usize = VOLUMES * COS_BINS;
pub(super) const COLOUR_DIM: usize = VOLUMES * COLOUR_BINS;

/// Splits a continuous bin coordinate (bin `k` centred on `k + 0.5`) into at
/// most two `(bin, weight)` pairs.
fn spread(pos: f64, bins: usize, cyclic: bool) -> [(usize, f64); 2] {
    let x = pos - 0.5;
    let lo = x.floor();
    let frac = x - lo;
    let lo = lo as i64;
    let n = bins as i64;
    let fix = |b: i64| -> Option<usize> {
        if cyclic {
            Some(b.rem_euclid(n) as usize)
        } else if (0..n).contains(&b) {
            Some(b as usize)
        } else {
            None
        }
    };
    match (fix(lo), fix(lo + 1)) {
        (Some(a), Some(b)) => [(a, 1.0 - frac), (b, frac)],
        (Some(a), None) => [(a, 1.0), (a, 0.0)],
        (None, Some(b)) => [(b, 1.0), (b, 0.0)],
        (None, None) => unreachable!("position outside the histogram"),
    }
}

/// D65 CIELab of an sRGB colour.
pub fn srgb_to_lab(c: &Rgb) -> [f64; 3] {
    let [r, g, b] = c.map(srgb_to_linear);
    let x = (0.412_456_4 * r + 0.357_576_1 * g + 0.180_437_5 * b) / 0.950_47;
    let y = 0.212_672_9 * r + 0.715_152_2 * g + 0.072_175_0 * b;
    let z = (0.019_333_9 * r + 0.119_192 * g + 0.950_304_1 * b) / 1.088_83;
    let f = |t: f64| {
        if t > 216.0 / 24389.0 {
            t.cbrt()
        } else {
            (24389.0 / 27.0 * t + 16.0) / 116.0
        }
    };
    let (fx, fy, fz) = (f(x), f(y), f(z));
    [116.0 * fy - 16.0, 500.0 * (fx - fy), 200.0 * (fy - fz)]
}

fn lab_distance(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    let d = (a[0] - b[0]).abs() / 100.0 + (a[1] - b[1]).abs() / 220.0 + (a[2] - b[2]).abs() / 220.0;
    (d / 3.0).clamp(0.0, 1.0)
}

pub(super) fn shot(ctx: &Context, kp: usize, out: &mut [f64], colour: bool) -> bool {
    let cloud = ctx.cloud;
    let points = cloud.points();
    let normals = cloud.normals().unwrap();
    let centre = points[kp];
    let lrf_nbs = ctx.index.radius(&centre, ctx.radii.lrf);
    let kp_normal = cloud.normal_is_valid(kp).then(|| normals[kp]);
    let Some(frame) = local_reference_frame(points, &centre, &lrf_nbs, ctx.radii.lrf, kp_normal.as_ref()) else {
        return false;
    };
    let support = if ctx.radii.lrf == ctx.radii.support {
        lrf_nbs
    } else {
        ctx.index.radius(&centre, ctx.radii.support)
    };
    if support.len() < ctx.params.min_support {
        return false;
    }
    let z: Vector3<f64> = frame.row(2).transpose();
    let radius = ctx.radii.support;
    let kp_lab = colour.then(|| srgb_to_lab(&cloud.colours().unwrap()[kp]));
    let (geo, col) = out.split_at_mut(SHOT_DIM);
    let mut used = 0usize;
    for nb in &support {
        if nb.index == kp || nb.dist_sq == 0.0 || !cloud.normal_is_valid(nb.index) {
            continue;
        }
        let local = frame * (points[nb.index] - centre);
        let dist = nb.distance();
        let azimuth = local.y.atan2(local.x);
        let elevation = (local.z / dist).clamp(-1.0, 1.0).asin();
        let az = spread((azimuth + PI) / (2.0 * PI) * AZIMUTH as f64, AZIMUTH, true);
        let el = spread((elevation + PI / 2.0) / PI * ELEVATION as f64, ELEVATION, false);
        let rad = spread((dist / radius).min(1.0) * RADIAL as f64, RADIAL, false);
        let cosine = z.dot(&normals[nb.index]).clamp(-1.0, 1.0);
        let cs = spread((cosine + 1.0) / 2.0 * COS_BINS as f64, COS_BINS, false);
        let cd = kp_lab.map(|lab| {
            let d = lab_distance(&lab, &srgb_to_lab(&cloud.colours().unwrap()[nb.index]));
            spread(d * COLOUR_BINS as f64, COLOUR_BINS, false)
        });
        for (a, wa) in az {
            for (e, we) in el {
                for (r, wr) in rad {
                    let w = wa * we * wr;
                    if w == 0.0 {
                        continue;
                    }
                    let volume = a + AZIMUTH * (e + ELEVATION * r);
                    for (c, wc) in cs {
                        geo[volume * COS_BINS + c] += w * wc;
                    }
                    if let Some(cd) = cd {
                        for (c, wc) in cd {
                            col[volume * COLOUR_BINS + c] += w * wc;
                        }
                    }
                }
            }
        }
        used += 1;
    }
    if used + 1 < ctx.params.min_support {
        return false;
    }
    let norm = out.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm == 0.0 {
        return false;
    }
    out.iter_mut().for_each(|v| *v /= norm);
    true
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spread_conserves_weight() {
        for pos in [0.0, 0.3, 0.5, 1.7, 7.9, 8.0] {
            let s = spread(pos, 8, true);
            assert!((s[0].1 + s[1].1 - 1.0).abs() < 1e-15);
            let s = spread(pos.min(2.0), 2, false);
            assert!((s[0].1 + s[1].1 - 1.0).abs() < 1e-15);
        }
        assert_eq!(spread(0.1, 8, true)[0].0, 7);
        assert_eq!(spread(0.5, 11, false), [(0, 1.0), (1, 0.0)]);
    }

    #[test]
    fn lab_reference_values() {
        let white = srgb_to_lab(&[1.0, 1.0, 1.0]);
        assert!((white[0] - 100.0).abs() < 1e-3 && white[1].abs() < 1e-2 && white[2].abs() < 1e-2);
        let black = srgb_to_lab(&[0.0, 0.0, 0.0]);
        assert!(black.iter().all(|v| v.abs() < 1e-9));
        // sRGB red is L*a*b* = (53.24, 80.09, 67.20).
        let red = srgb_to_lab(&[1.0, 0.0, 0.0]);
        assert!((red[0] - 53.24).abs() < 0.05 && (red[1] - 80.09).abs() < 0.1 && (red[2] - 67.20).abs() < 0.1);
    }
}
