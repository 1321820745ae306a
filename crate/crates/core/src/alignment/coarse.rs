//! Consensus-sampling rigid alignment of putative correspondences.

use nalgebra::{Matrix3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{AlignError, AlignmentReport, CorrespondenceSet};
use crate::cloud::RigidTransform;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CoarseParams {
    /// Metres.
    pub inlier_threshold: f64,
    pub min_inliers: usize,
    pub max_iterations: usize,
    /// Stop once a better consensus is this unlikely.
    pub confidence: f64,
    pub seed: u64,
}

impl Default for CoarseParams {
    fn default() -> Self {
        Self {
            inlier_threshold: 0.1,
            min_inliers: 5,
            max_iterations: 10_000,
            confidence: 0.999,
            seed: 42,
        }
    }
}

/// Least-squares rotation and translation with `tgt ≈ T · src`. `None` for
/// fewer than three points or collinear input.
pub fn fit_rigid(src: &[Vector3<f64>], tgt: &[Vector3<f64>]) -> Option<RigidTransform> {
    if src.len() != tgt.len() || src.len() < 3 {
        return None;
    }
    let n = src.len() as f64;
    let cs = src.iter().sum::<Vector3<f64>>() / n;
    let ct = tgt.iter().sum::<Vector3<f64>>() / n;
    let mut h = Matrix3::zeros();
    for (s, t) in src.iter().zip(tgt) {
        h += (s - cs) * (t - ct).transpose();
    }
    let svd = h.svd(true, true);
    let mut sv = svd.singular_values;
    sv.as_mut_slice().sort_by(|a, b| b.total_cmp(a));
    if !(sv[0] > 0.0) || sv[1] <= 1e-12 * sv[0] {
        return None;
    }
    let (u, v) = (svd.u?, svd.v_t?.transpose());
    let mut d = Matrix3::identity();
    if (v * u.transpose()).determinant() < 0.0 {
        d[(2, 2)] = -1.0;
    }
    let r = v * d * u.transpose();
    let rigid = RigidTransform::from_approximate(r, Vector3::zeros());
    let t = ct - rigid.apply(&cs);
    Some(RigidTransform::from_approximate(*rigid.rotation(), t))
}

struct Consensus {
    inliers: Vec<usize>,
    cost: f64,
    transform: RigidTransform,
}

fn consensus(t: RigidTransform, src: &[Vector3<f64>], tgt: &[Vector3<f64>], thr: f64) -> Consensus {
    let thr2 = thr * thr;
    let mut inliers = Vec::new();
    let mut cost = 0.0;
    for (i, (s, q)) in src.iter().zip(tgt).enumerate() {
        let e = (t.apply(s) - q).norm_squared();
        if e <= thr2 {
            inliers.push(i);
            cost += e;
        } else {
            cost += thr2;
        }
    }
    Consensus {
        inliers,
        cost,
        transform: t,
    }
}

fn better(a: &Consensus, b: &Consensus) -> bool {
    a.inliers.len() > b.inliers.len() || (a.inliers.len() == b.inliers.len() && a.cost < b.cost)
}

/// Estimates `T` with `tgt_points[c.target] ≈ T · src_points[c.source]` for
/// the correspondences `c` that agree with it. Point slices are indexed by
/// descriptor row.
pub fn coarse_align(
    corr: &CorrespondenceSet,
    src_points: &[Vector3<f64>],
    tgt_points: &[Vector3<f64>],
    params: &CoarseParams,
) -> Result<AlignmentReport, AlignError> {
    if !(params.inlier_threshold > 0.0) || !(params.confidence > 0.0 && params.confidence < 1.0) {
        return Err(AlignError::BadParams("threshold must be positive and confidence in (0, 1)"));
    }
    let n = corr.len();
    if n < 3 {
        return Err(AlignError::InsufficientCorrespondences(n));
    }
    if corr.pairs.iter().any(|c| c.source >= src_points.len() || c.target >= tgt_points.len()) {
        return Err(AlignError::BadParams("correspondence outside the keypoint lists"));
    }
    let src: Vec<Vector3<f64>> = corr.pairs.iter().map(|c| src_points[c.source]).collect();
    let tgt: Vec<Vector3<f64>> = corr.pairs.iter().map(|c| tgt_points[c.target]).collect();
    let thr = params.inlier_threshold;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut best: Option<Consensus> = None;
    let mut needed = params.max_iterations;
    let mut iterations = 0;
    while iterations < needed {
        iterations += 1;
        let a = rng.gen_range(0..n);
        let mut b = rng.gen_range(0..n - 1);
        if b >= a {
            b += 1;
        }
        let mut c = rng.gen_range(0..n - 2);
        for lo in [a.min(b), a.max(b)] {
            if c >= lo {
                c += 1;
            }
        }
        let idx = [a, b, c];
        let consistent = (0..3).all(|k| {
            let (p, q) = (idx[k], idx[(k + 1) % 3]);
            ((src[p] - src[q]).norm() - (tgt[p] - tgt[q]).norm()).abs() <= 2.0 * thr
        });
        if !consistent || (src[b] - src[a]).cross(&(src[c] - src[a])).norm() < thr * thr {
            continue;
        }
        let Some(t) = fit_rigid(&idx.map(|i| src[i]), &idx.map(|i| tgt[i])) else {
            continue;
        };
        let cand = consensus(t, &src, &tgt, thr);
        if best.as_ref().is_none_or(|b| better(&cand, b)) {
            let w = cand.inliers.len() as f64 / n as f64;
            let miss = 1.0 - w * w * w;
            if miss <= 0.0 {
                needed = iterations;
            } else if miss < 1.0 {
                let est = ((1.0 - params.confidence).ln() / miss.ln()).ceil();
                needed = needed.min(est.max(1.0) as usize);
            }
            best = Some(cand);
        }
    }
    let Some(mut best) = best else {
        return Err(AlignError::AlignmentFailed {
            inliers: 0,
            features: n,
            best: None,
        });
    };
    // Refit on the consensus set until it stops changing.
    for _ in 0..10 {
        let Some(t) = fit_rigid(
            &best.inliers.iter().map(|&i| src[i]).collect::<Vec<_>>(),
            &best.inliers.iter().map(|&i| tgt[i]).collect::<Vec<_>>(),
        ) else {
            break;
        };
        let cand = consensus(t, &src, &tgt, thr);
        if cand.inliers.len() < best.inliers.len() {
            break;
        }
        let same = cand.inliers == best.inliers;
        best = cand;
        if same {
            break;
        }
    }
    let inliers = best.inliers.len();
    if inliers < params.min_inliers {
        return Err(AlignError::AlignmentFailed {
            inliers,
            features: n,
            best: Some(best.transform),
        });
    }
    Ok(AlignmentReport::new(best.transform, inliers, n, iterations))
}
