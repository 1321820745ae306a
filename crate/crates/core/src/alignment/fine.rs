//! Point-to-plane ICP and the self-consistency residual.

use nalgebra::{Matrix6, Vector3, Vector6};
use serde::{Deserialize, Serialize};

use super::{AlignError, AlignmentReport};
use crate::cloud::{PointCloud, RigidTransform, SpatialIndex, Twist};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FineParams {
    /// Correspondences farther apart than this (metres) are dropped.
    pub max_corr_dist: f64,
    /// Cauchy kernel scale, metres.
    pub cauchy_scale: f64,
    pub max_iterations: usize,
    /// Stop when the update twist is shorter than this.
    pub tolerance: f64,
    pub min_correspondences: usize,
}

impl Default for FineParams {
    fn default() -> Self {
        Self {
            max_corr_dist: 0.25,
            cauchy_scale: 0.05,
            max_iterations: 50,
            tolerance: 1e-6,
            min_correspondences: 100,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResidualStats {
    pub count: usize,
    pub mean: f64,
    pub median: f64,
    pub p95: f64,
}

impl ResidualStats {
    /// `None` for an empty sample.
    pub fn from_residuals(mut r: Vec<f64>) -> Option<Self> {
        if r.is_empty() {
            return None;
        }
        r.sort_by(f64::total_cmp);
        let n = r.len();
        let quantile = |q: f64| {
            let pos = q * (n - 1) as f64;
            let lo = pos.floor() as usize;
            let hi = (lo + 1).min(n - 1);
            r[lo] + (pos - lo as f64) * (r[hi] - r[lo])
        };
        Some(Self {
            count: n,
            mean: r.iter().sum::<f64>() / n as f64,
            median: quantile(0.5),
            p95: quantile(0.95),
        })
    }
}

struct Pair {
    p: Vector3<f64>,
    q: Vector3<f64>,
    n: Vector3<f64>,
}

fn correspondences(src: &PointCloud, tgt: &PointCloud, index: &SpatialIndex, t: &RigidTransform, max_dist: f64) -> Vec<Pair> {
    let normals = tgt.normals().unwrap();
    let max2 = max_dist * max_dist;
    src.points()
        .iter()
        .filter_map(|s| {
            let p = t.apply(s);
            let nb = index.nearest(&p)?;
            (nb.dist_sq <= max2 && tgt.normal_is_valid(nb.index)).then(|| Pair {
                p,
                q: tgt.points()[nb.index],
                n: normals[nb.index],
            })
        })
        .collect()
}

fn solve(h: &Matrix6<f64>, g: &Vector6<f64>) -> Option<Vector6<f64>> {
    let damped = h + Matrix6::identity() * (1e-9 * h.trace() / 6.0).max(1e-15);
    damped.cholesky().map(|c| -c.solve(g))
}

/// Refines `prior` so that `tgt ≈ T · src`, minimising Cauchy-weighted
/// point-to-plane distances against the target normals.
pub fn fine_align(
    src: &PointCloud,
    tgt: &PointCloud,
    prior: &RigidTransform,
    params: &FineParams,
) -> Result<AlignmentReport, AlignError> {
    if !src.has_normals() || !tgt.has_normals() {
        return Err(AlignError::MissingNormals);
    }
    if !(params.max_corr_dist > 0.0 && params.cauchy_scale > 0.0 && params.tolerance >= 0.0) {
        return Err(AlignError::BadParams("distances must be positive"));
    }
    let index = tgt.spatial_index();
    let mut t = *prior;
    let mut pairs = correspondences(src, tgt, &index, &t, params.max_corr_dist);
    if pairs.len() < params.min_correspondences.max(6) {
        return Err(AlignError::NoOverlap(pairs.len()));
    }
    let c2 = params.cauchy_scale * params.cauchy_scale;
    let mut iterations = 0;
    while iterations < params.max_iterations {
        iterations += 1;
        let mut h = Matrix6::zeros();
        let mut g = Vector6::zeros();
        for pr in &pairs {
            let r = pr.n.dot(&(pr.p - pr.q));
            let w = 1.0 / (1.0 + r * r / c2);
            let pn = pr.p.cross(&pr.n);
            let j = Vector6::new(pn.x, pn.y, pn.z, pr.n.x, pr.n.y, pr.n.z);
            h += w * j * j.transpose();
            g += w * r * j;
        }
        let Some(delta) = solve(&h, &g) else {
            break;
        };
        t = RigidTransform::exp(&Twist::from_vector(&delta)).compose(&t);
        let next = correspondences(src, tgt, &index, &t, params.max_corr_dist);
        if next.len() < 6 {
            break;
        }
        pairs = next;
        if delta.norm() < params.tolerance {
            break;
        }
    }
    let mut report = AlignmentReport::new(t, pairs.len(), src.len(), iterations);
    report.consistency = Some(self_consistency(src, tgt, &t, params.max_corr_dist)?);
    Ok(report)
}

/// Absolute point-to-plane distance from each transformed source point to
/// its nearest target point's tangent plane, over pairs closer than
/// `max_corr_dist`.
pub fn self_consistency(
    src: &PointCloud,
    tgt: &PointCloud,
    t: &RigidTransform,
    max_corr_dist: f64,
) -> Result<ResidualStats, AlignError> {
    if !tgt.has_normals() {
        return Err(AlignError::MissingNormals);
    }
    let pairs = correspondences(src, tgt, &tgt.spatial_index(), t, max_corr_dist);
    let residuals = pairs.iter().map(|pr| pr.n.dot(&(pr.p - pr.q)).abs()).collect();
    ResidualStats::from_residuals(residuals).ok_or(AlignError::NoOverlap(0))
}
