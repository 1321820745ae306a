//! Relative repeatability under known transforms, and the rotation and noise sweeps.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::{detect, DetectError, DetectorKind, DetectorParams, KeypointSet};
use crate::cloud::{estimate_normals, PointCloud, RigidTransform, SpatialIndex};
use crate::submap::add_noise;

/// Coincidence tolerance used by both sweeps, metres.
pub const SWEEP_EPSILON: f64 = 1e-2;

/// 0°, 10°, …, 180°.
pub const ROTATION_ANGLES_DEG: [f64; 19] = {
    let mut a = [0.0; 19];
    let mut i = 0;
    while i < 19 {
        a[i] = 10.0 * i as f64;
        i += 1;
    }
    a
};

/// σ = 0, 0.005, …, 0.05 m.
pub const NOISE_LEVELS: [f64; 11] = [0.0, 0.005, 0.01, 0.015, 0.02, 0.025, 0.03, 0.035, 0.04, 0.045, 0.05];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepVariable {
    /// Degrees about the vertical axis.
    Rotation,
    /// Noise standard deviation, metres.
    Noise,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RepeatabilityReport {
    pub variable: SweepVariable,
    pub value: f64,
    /// `repeatable / reference` keypoint count.
    pub r: f64,
    pub repeatable: usize,
    pub reference: usize,
    pub detected: usize,
}

/// Fraction of `kp1` recovered by `kp2` mapped through `truth` (kp2 frame to
/// kp1 frame). Pairs closer than `eps` are matched one-to-one in ascending
/// distance order.
pub fn repeatability(kp1: &KeypointSet, kp2: &KeypointSet, truth: &RigidTransform, eps: f64) -> Result<(usize, f64), DetectError> {
    if kp1.is_empty() || kp2.is_empty() {
        return Err(DetectError::EmptyKeypointSet);
    }
    let index = SpatialIndex::new(&kp1.points);
    let mut pairs = Vec::new();
    for (j, p) in kp2.points.iter().enumerate() {
        for nb in index.radius(&truth.apply(p), eps) {
            if nb.dist_sq < eps * eps {
                pairs.push((nb.dist_sq, nb.index, j));
            }
        }
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut used1 = vec![false; kp1.len()];
    let mut used2 = vec![false; kp2.len()];
    let mut count = 0;
    for (_, i, j) in pairs {
        if !used1[i] && !used2[j] {
            used1[i] = true;
            used2[j] = true;
            count += 1;
        }
    }
    Ok((count, count as f64 / kp1.len() as f64))
}

/// A perturbed copy on which nothing was detected repeats nothing.
fn sweep_repeatability(base: &KeypointSet, kp: &KeypointSet, truth: &RigidTransform) -> Result<(usize, f64), DetectError> {
    if kp.is_empty() && !base.is_empty() {
        return Ok((0, 0.0));
    }
    repeatability(base, kp, truth, SWEEP_EPSILON)
}

/// Detects on `cloud` and on copies rotated about its z axis by each of
/// [`ROTATION_ANGLES_DEG`]. Normals rotate with the points.
pub fn rotation_sweep(cloud: &PointCloud, kind: DetectorKind, params: &DetectorParams) -> Result<Vec<RepeatabilityReport>, DetectError> {
    let cloud = cloud.clone().set_resolution(cloud.resolution());
    let base = detect(kind, &cloud, params)?;
    ROTATION_ANGLES_DEG
        .iter()
        .map(|&deg| {
            let rot = RigidTransform::rotation_z(deg.to_radians());
            let moved = detect(kind, &cloud.transformed(&rot), params)?;
            let (repeatable, r) = sweep_repeatability(&base, &moved, &rot.inverse())?;
            Ok(RepeatabilityReport {
                variable: SweepVariable::Rotation,
                value: deg,
                r,
                repeatable,
                reference: base.len(),
                detected: moved.len(),
            })
        })
        .collect()
}

/// Detects on noisy copies of `cloud` at each of [`NOISE_LEVELS`]. The
/// resolution of the clean cloud is kept so that radii do not drift with
/// noise; for detectors using normals, normals are re-estimated on every
/// copy (clean included) with viewpoint at the cloud origin.
pub fn noise_sweep(
    cloud: &PointCloud,
    kind: DetectorKind,
    params: &DetectorParams,
    seed: u64,
) -> Result<Vec<RepeatabilityReport>, DetectError> {
    let res = cloud.resolution();
    let prepare = |c: PointCloud| {
        let c = c.set_resolution(res);
        if kind.needs_normals() {
            estimate_normals(&c, params.normal_radius.resolve(res), Vector3::zeros())
        } else {
            c
        }
    };
    let base = detect(kind, &prepare(cloud.clone()), params)?;
    NOISE_LEVELS
        .iter()
        .enumerate()
        .map(|(k, &sigma)| {
            let noisy = prepare(add_noise(cloud, sigma, seed.wrapping_add(k as u64)));
            let kp = detect(kind, &noisy, params)?;
            let (repeatable, r) = sweep_repeatability(&base, &kp, &RigidTransform::identity())?;
            Ok(RepeatabilityReport {
                variable: SweepVariable::Noise,
                value: sigma,
                r,
                repeatable,
                reference: base.len(),
                detected: kp.len(),
            })
        })
        .collect()
}
