use nalgebra::{Matrix3, SymmetricEigen, Vector3};

use super::{Neighbour, PointCloud, SpatialIndex, INVALID_NORMAL};

/// Minimum neighbourhood size (including the query point) for a valid normal.
pub const MIN_NORMAL_NEIGHBOURS: usize = 3;

/// Covariance about the centroid of `neighbours`.
pub(crate) fn centroid_covariance(points: &[Vector3<f64>], neighbours: &[Neighbour]) -> Matrix3<f64> {
    let n = neighbours.len() as f64;
    let centroid: Vector3<f64> = neighbours.iter().map(|nb| points[nb.index]).sum::<Vector3<f64>>() / n;
    let mut cov = Matrix3::zeros();
    for nb in neighbours {
        let d = points[nb.index] - centroid;
        cov += d * d.transpose();
    }
    cov / n
}

/// Eigen-decomposition sorted by descending eigenvalue.
pub(crate) fn sorted_eigen(m: Matrix3<f64>) -> ([f64; 3], [Vector3<f64>; 3]) {
    let eig = SymmetricEigen::new(m);
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    (
        order.map(|i| eig.eigenvalues[i]),
        order.map(|i| eig.eigenvectors.column(i).into_owned()),
    )
}

/// Per-point normal from the smallest eigenvector of the neighbourhood
/// covariance, oriented toward `viewpoint`. Points with fewer than three
/// neighbours (themselves included) get an invalid zero normal.
pub fn estimate_normals(cloud: &PointCloud, radius: f64, viewpoint: Vector3<f64>) -> PointCloud {
    assert!(radius > 0.0, "normal radius must be positive");
    let index = SpatialIndex::new(cloud.points());
    let points = cloud.points();
    let mut buf = Vec::new();
    let normals = points
        .iter()
        .map(|p| {
            index.radius_into(p, radius, &mut buf);
            if buf.len() < MIN_NORMAL_NEIGHBOURS {
                return INVALID_NORMAL;
            }
            let (_, vecs) = sorted_eigen(centroid_covariance(points, &buf));
            let mut n = vecs[2].normalize();
            if n.dot(&(viewpoint - p)) < 0.0 {
                n = -n;
            }
            n
        })
        .collect();
    PointCloud::from_parts_unchecked(points.to_vec(), Some(normals), cloud.colours().map(|c| c.to_vec()))
        .set_resolution(cloud.resolution())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cloud::RigidTransform;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn planar_grid_points_up() {
        let mut pts = Vec::new();
        for i in 0..20 {
            for j in 0..20 {
                pts.push(Vector3::new(i as f64 * 0.1, j as f64 * 0.1, 0.0));
            }
        }
        let c = estimate_normals(&PointCloud::new(pts).unwrap(), 0.25, Vector3::new(0.0, 0.0, 10.0));
        for n in c.normals().unwrap() {
            assert!((n - Vector3::z()).norm() < 1e-6);
        }
    }

    #[test]
    fn sphere_normals_face_centre() {
        // Analytic oracle: the surface normal of a sphere is radial; with the
        // viewpoint at the centre it must point inward.
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let pts: Vec<_> = (0..20_000)
            .map(|_| {
                Vector3::new(
                    rng.gen_range(-1.0..1.0),
                    rng.gen_range(-1.0..1.0),
                    rng.gen_range(-1.0..1.0),
                )
                .normalize()
            })
            .collect();
        let c = estimate_normals(&PointCloud::new(pts.clone()).unwrap(), 0.1, Vector3::zeros());
        for (p, n) in pts.iter().zip(c.normals().unwrap()) {
            let angle = n.dot(&(-p)).clamp(-1.0, 1.0).acos().to_degrees();
            assert!(angle < 5.0, "angle {angle}");
        }
    }

    #[test]
    fn two_points_are_flagged() {
        let c = PointCloud::new(vec![Vector3::zeros(), Vector3::x() * 0.01]).unwrap();
        let out = estimate_normals(&c, 1.0, Vector3::z());
        assert!(!out.normal_is_valid(0) && !out.normal_is_valid(1));
    }

    #[test]
    fn rotation_equivariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let pts: Vec<_> = (0..1500)
            .map(|_| {
                let x: f64 = rng.gen_range(-1.0..1.0);
                let y: f64 = rng.gen_range(-1.0..1.0);
                Vector3::new(x, y, 0.2 * (3.0 * x).sin() * y.cos())
            })
            .collect();
        let view = Vector3::new(0.1, -0.2, 5.0);
        let c = PointCloud::new(pts).unwrap();
        let t = RigidTransform::exp(&crate::cloud::Twist::new(
            Vector3::new(0.3, -0.5, 1.1),
            Vector3::new(1.0, 2.0, -0.5),
        ));
        let a = estimate_normals(&c, 0.12, view);
        let b = estimate_normals(&c.transformed(&t), 0.12, t.apply(&view));
        for (na, nb) in a.normals().unwrap().iter().zip(b.normals().unwrap()) {
            assert!((t.apply_vector(na) - nb).norm() < 1e-6);
        }
    }
}
