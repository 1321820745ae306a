//! Per-point saliency for the neighbourhood-statistics detectors.

use nalgebra::{Matrix3, Matrix6, SymmetricEigen, Vector3, Vector6};

use super::{DetectorKind, DetectorParams};
use crate::cloud::{luma, sorted_eigen, srgb_to_linear, Neighbour, PointCloud, SpatialIndex};

/// `None` marks points that are not candidates at all.
pub(super) fn saliency(
    kind: DetectorKind,
    cloud: &PointCloud,
    index: &SpatialIndex,
    radius: f64,
    params: &DetectorParams,
    res: f64,
) -> Vec<Option<f64>> {
    let kind = if kind == DetectorKind::Harris6d && !cloud.has_colours() {
        log::warn!("harris6d on a cloud without colours, using harris3d");
        DetectorKind::Harris3d
    } else {
        kind
    };
    let gradients = (kind == DetectorKind::Harris6d).then(|| intensity_gradients(cloud, index, params.normal_radius.resolve(res), radius));
    let points = cloud.points();
    let mut buf = Vec::new();
    (0..cloud.len())
        .map(|i| {
            index.radius_into(&points[i], radius, &mut buf);
            if buf.len() < params.min_neighbours {
                return None;
            }
            match kind {
                DetectorKind::Iss => iss(points, i, &buf, params),
                DetectorKind::Harris3d | DetectorKind::Lowe | DetectorKind::Tomasi => {
                    normal_tensor(cloud, &buf).map(|m| corner_response(kind, &m, params.harris_k))
                }
                DetectorKind::Curvature => principal_curvature(cloud, i, &buf),
                DetectorKind::Harris6d => harris6d(cloud, gradients.as_deref().unwrap(), &buf),
                DetectorKind::Susan => susan(cloud, i, &buf, params),
                DetectorKind::Sift3d => unreachable!("sift has its own pipeline"),
            }
        })
        .collect()
}

/// Scatter about the query point; salient when both eigenvalue ratios pass
/// and the smallest eigenvalue is not numerically zero.
fn iss(points: &[Vector3<f64>], i: usize, nbs: &[Neighbour], params: &DetectorParams) -> Option<f64> {
    let centre = points[i];
    let mut m = Matrix3::zeros();
    for nb in nbs {
        let d = points[nb.index] - centre;
        m += d * d.transpose();
    }
    m /= nbs.len() as f64;
    let (l, _) = sorted_eigen(m);
    if !(l[0] > 0.0) || l[2] <= 1e-9 * l[0] {
        return None;
    }
    (l[1] / l[0] < params.iss_gamma21 && l[2] / l[1] < params.iss_gamma32).then_some(l[2])
}

/// Mean outer product of the valid neighbour normals.
fn normal_tensor(cloud: &PointCloud, nbs: &[Neighbour]) -> Option<Matrix3<f64>> {
    let normals = cloud.normals()?;
    let mut m = Matrix3::zeros();
    let mut count = 0usize;
    for nb in nbs {
        if cloud.normal_is_valid(nb.index) {
            let n = normals[nb.index];
            m += n * n.transpose();
            count += 1;
        }
    }
    (count >= 3).then(|| m / count as f64)
}

fn corner_response(kind: DetectorKind, m: &Matrix3<f64>, k: f64) -> f64 {
    let det = m.determinant();
    let tr = m.trace();
    match kind {
        DetectorKind::Harris3d => k + det - k * tr * tr,
        DetectorKind::Lowe => {
            if tr > 0.0 {
                det / (tr * tr)
            } else {
                0.0
            }
        }
        DetectorKind::Tomasi => SymmetricEigen::new(*m).eigenvalues.min(),
        _ => unreachable!(),
    }
}

/// Largest eigenvalue of the covariance of neighbour normals projected
/// onto the tangent plane at `i`.
fn principal_curvature(cloud: &PointCloud, i: usize, nbs: &[Neighbour]) -> Option<f64> {
    let normals = cloud.normals()?;
    if !cloud.normal_is_valid(i) {
        return None;
    }
    let n = normals[i];
    let proj = Matrix3::identity() - n * n.transpose();
    let projected: Vec<Vector3<f64>> = nbs
        .iter()
        .filter(|nb| cloud.normal_is_valid(nb.index))
        .map(|nb| proj * normals[nb.index])
        .collect();
    if projected.len() < 3 {
        return None;
    }
    let mean: Vector3<f64> = projected.iter().sum::<Vector3<f64>>() / projected.len() as f64;
    let mut cov = Matrix3::zeros();
    for v in &projected {
        let d = v - mean;
        cov += d * d.transpose();
    }
    cov /= projected.len() as f64;
    Some(sorted_eigen(cov).0[0])
}

/// Tangent-plane luma gradient per point, scaled by `scale` so that it is
/// dimensionless like a unit normal.
fn intensity_gradients(cloud: &PointCloud, index: &SpatialIndex, radius: f64, scale: f64) -> Vec<Vector3<f64>> {
    let points = cloud.points();
    let colours = cloud.colours().expect("checked by caller");
    let intensity: Vec<f64> = colours.iter().map(|c| luma(&c.map(srgb_to_linear))).collect();
    let mut buf = Vec::new();
    (0..cloud.len())
        .map(|i| {
            if !cloud.normal_is_valid(i) {
                return Vector3::zeros();
            }
            index.radius_into(&points[i], radius, &mut buf);
            if buf.len() < 3 {
                return Vector3::zeros();
            }
            let n = cloud.normals().unwrap()[i];
            let proj = Matrix3::identity() - n * n.transpose();
            let k = buf.len() as f64;
            let pc: Vector3<f64> = buf.iter().map(|nb| points[nb.index]).sum::<Vector3<f64>>() / k;
            let ic: f64 = buf.iter().map(|nb| intensity[nb.index]).sum::<f64>() / k;
            let mut a = Matrix3::zeros();
            let mut b = Vector3::zeros();
            for nb in &buf {
                let d = proj * (points[nb.index] - pc);
                a += d * d.transpose();
                b += d * (intensity[nb.index] - ic);
            }
            // The normal direction carries no data; pinning it to zero keeps
            // the system invertible.
            let sys = a + n * n.transpose() * a.trace().max(f64::MIN_POSITIVE);
            match sys.try_inverse() {
                Some(inv) => proj * (inv * b) * scale,
                None => Vector3::zeros(),
            }
        })
        .collect()
}

/// Third-largest eigenvalue of the mean outer product of `[n; g]`. The
/// determinant is useless here: with unit normals one eigenvalue sits near
/// 1 and the others are orders of magnitude smaller.
fn harris6d(cloud: &PointCloud, gradients: &[Vector3<f64>], nbs: &[Neighbour]) -> Option<f64> {
    let normals = cloud.normals()?;
    let mut m = Matrix6::zeros();
    let mut count = 0usize;
    for nb in nbs {
        if cloud.normal_is_valid(nb.index) {
            let n = normals[nb.index];
            let g = gradients[nb.index];
            let v = Vector6::new(n.x, n.y, n.z, g.x, g.y, g.z);
            m += v * v.transpose();
            count += 1;
        }
    }
    if count < 6 {
        return None;
    }
    m /= count as f64;
    let mut e: Vec<f64> = SymmetricEigen::new(m).eigenvalues.iter().copied().collect();
    e.sort_by(|a, b| b.total_cmp(a));
    Some(e[2])
}

/// USAN: neighbours whose normal is within the angular threshold of the
/// nucleus normal. A corner has a small USAN whose centroid is displaced
/// from the nucleus.
fn susan(cloud: &PointCloud, i: usize, nbs: &[Neighbour], params: &DetectorParams) -> Option<f64> {
    let normals = cloud.normals()?;
    if !cloud.normal_is_valid(i) {
        return None;
    }
    let points = cloud.points();
    let n = normals[i];
    let mut area = 0usize;
    let mut centroid = Vector3::zeros();
    let mut valid = 0usize;
    for nb in nbs {
        if nb.index == i || !cloud.normal_is_valid(nb.index) {
            continue;
        }
        valid += 1;
        if 1.0 - n.dot(&normals[nb.index]) <= params.susan_angular {
            area += 1;
            centroid += points[nb.index];
        }
    }
    if valid == 0 {
        return None;
    }
    let half = valid as f64 / 2.0;
    if area as f64 >= half || area == 0 {
        return None;
    }
    centroid /= area as f64;
    ((centroid - points[i]).norm() >= params.susan_distance).then(|| (half - area as f64) / valid as f64)
}
