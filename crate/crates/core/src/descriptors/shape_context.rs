//! 3D shape context and its unique-frame variant.
//!
//! The support sphere is divided into azimuth × elevation × log-radial
//! bins. Each neighbour adds `1 / (ρ · V^{1/3})`, where `ρ` is its local
//! point count and `V` the volume of the bin it falls in.
//!
//! 3DSC aligns the north pole with the keypoint normal. Its azimuth origin
//! is the frame's x axis turned by a pseudo-random angle drawn from the seed
//! and the keypoint index. USC uses the local reference frame as is.

use std::f64::consts::PI;

use nalgebra::{Matrix3, Rotation3, Unit, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{local_reference_frame, Context};

const SC3D_BINS: (usize, usize, usize) = (12, 11, 15);
const USC_BINS: (usize, usize, usize) = (14, 14, 10);
pub(super) const SC3D_DIM: usize = SC3D_BINS.0 * SC3D_BINS.1 * SC3D_BINS.2;
pub(super) const USC_DIM: usize = USC_BINS.0 * USC_BINS.1 * USC_BINS.2;

/// Neighbour count within the density radius, query included, per point.
pub(super) fn point_density(ctx: &Context) -> Vec<f64> {
    let mut buf = Vec::new();
    ctx.cloud
        .points()
        .iter()
        .map(|p| {
            ctx.index.radius_into(p, ctx.radii.density, &mut buf);
            buf.len() as f64
        })
        .collect()
}

pub(super) fn sc3d(ctx: &Context, kp: usize, density: &[f64], out: &mut [f64]) -> bool {
    let cloud = ctx.cloud;
    if !cloud.normal_is_valid(kp) {
        return false;
    }
    let points = cloud.points();
    let centre = points[kp];
    let normal = cloud.normals().unwrap()[kp];
    let nbs = ctx.index.radius(&centre, ctx.radii.lrf);
    let Some(frame) = local_reference_frame(points, &centre, &nbs, ctx.radii.lrf, Some(&normal)) else {
        return false;
    };
    // Reference direction: the frame's x axis projected on the tangent plane.
    let x0: Vector3<f64> = frame.row(0).transpose();
    let x0 = x0 - normal * normal.dot(&x0);
    if x0.norm() < 1e-9 {
        return false;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(ctx.params.seed ^ (kp as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15));
    let turn: f64 = rng.gen_range(0.0..2.0 * PI);
    let x = Rotation3::from_axis_angle(&Unit::new_normalize(normal), turn) * x0.normalize();
    let y = normal.cross(&x);
    let basis = Matrix3::from_rows(&[x.transpose(), y.transpose(), normal.transpose()]);
    accumulate(ctx, kp, &basis, density, SC3D_BINS, out)
}

pub(super) fn usc(ctx: &Context, kp: usize, density: &[f64], out: &mut [f64]) -> bool {
    let cloud = ctx.cloud;
    let points = cloud.points();
    let centre = points[kp];
    let nbs = ctx.index.radius(&centre, ctx.radii.lrf);
    let normal = cloud.normal_is_valid(kp).then(|| cloud.normals().unwrap()[kp]);
    let Some(frame) = local_reference_frame(points, &centre, &nbs, ctx.radii.lrf, normal.as_ref()) else {
        return false;
    };
    accumulate(ctx, kp, &frame, density, USC_BINS, out)
}

fn accumulate(
    ctx: &Context,
    kp: usize,
    basis: &Matrix3<f64>,
    density: &[f64],
    (n_az, n_el, n_rad): (usize, usize, usize),
    out: &mut [f64],
) -> bool {
    let points = ctx.cloud.points();
    let centre = points[kp];
    let (rmin, rmax) = (ctx.radii.min, ctx.radii.support);
    let log_ratio = (rmax / rmin).ln();
    let edge = |j: usize| rmin * (log_ratio * j as f64 / n_rad as f64).exp();
    let radial_edges: Vec<f64> = (0..=n_rad).map(edge).collect();
    let d_az = 2.0 * PI / n_az as f64;
    let d_el = PI / n_el as f64;
    let support = ctx.index.radius(&centre, rmax);
    if support.len() < ctx.params.min_support {
        return false;
    }
    let mut used = 0usize;
    for nb in &support {
        if nb.index == kp || nb.dist_sq == 0.0 {
            continue;
        }
        let local = basis * (points[nb.index] - centre);
        let r = nb.distance();
        let polar = (local.z / r).clamp(-1.0, 1.0).acos();
        let azimuth = local.y.atan2(local.x).rem_euclid(2.0 * PI);
        let a = ((azimuth / d_az) as usize).min(n_az - 1);
        let e = ((polar / d_el) as usize).min(n_el - 1);
        let j = if r <= rmin {
            0
        } else {
            (((r / rmin).ln() / log_ratio * n_rad as f64) as usize).min(n_rad - 1)
        };
        let (r0, r1) = (if j == 0 { 0.0 } else { radial_edges[j] }, radial_edges[j + 1]);
        let volume = (r1.powi(3) - r0.powi(3)) / 3.0 * ((e as f64 * d_el).cos() - ((e + 1) as f64 * d_el).cos()) * d_az;
        let rho = density[nb.index].max(1.0);
        out[a + n_az * (e + n_el * j)] += 1.0 / (rho * volume.cbrt());
        used += 1;
    }
    used + 1 >= ctx.params.min_support
}
