use std::collections::BTreeSet;

use nalgebra::Vector3;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::*;
use crate::cloud::PointCloud;
use crate::descriptors::DescriptorSet;
use crate::testutil::terrain;

fn set(rows: &[Vec<f64>]) -> DescriptorSet {
    let dim = DescriptorKind::Pfh.dim();
    let mut data = Vec::new();
    for r in rows {
        let mut row = r.clone();
        row.resize(dim, 0.0);
        data.extend(row);
    }
    DescriptorSet::new(DescriptorKind::Pfh, (0..rows.len()).collect(), data, vec![false; rows.len()]).unwrap()
}

fn random_set(rng: &mut ChaCha8Rng, n: usize, used: usize) -> DescriptorSet {
    let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..used).map(|_| rng.gen_range(0.0..1.0)).collect()).collect();
    set(&rows)
}

/// Independent enumeration: rank every pair and test membership in both lists.
fn oracle(src: &DescriptorSet, tgt: &DescriptorSet, k: usize) -> BTreeSet<(usize, usize)> {
    let d = |i: usize, j: usize| descriptor_distance_sq(src.row(i), tgt.row(j));
    let rank_t = |i: usize, j: usize| (0..tgt.len()).filter(|&b| (d(i, b), b) < (d(i, j), j)).count();
    let rank_s = |i: usize, j: usize| (0..src.len()).filter(|&a| (d(a, j), a) < (d(i, j), i)).count();
    let mut mutual: Vec<(f64, usize, usize)> = Vec::new();
    for i in 0..src.len() {
        for j in 0..tgt.len() {
            if rank_t(i, j) < k && rank_s(i, j) < k {
                mutual.push((d(i, j), i, j));
            }
        }
    }
    mutual.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut out = BTreeSet::new();
    for (_, i, j) in mutual {
        if out.iter().all(|&(a, b)| a != i && b != j) {
            out.insert((i, j));
        }
    }
    out
}

fn descriptor_distance_sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn as_pairs(c: &CorrespondenceSet) -> BTreeSet<(usize, usize)> {
    c.pairs.iter().map(|p| (p.source, p.target)).collect()
}

#[test]
fn identical_sets_match_identically() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let s = random_set(&mut rng, 40, 10);
    let c = match_descriptors(&s, &s, 1).unwrap();
    assert_eq!(c.len(), 40);
    assert!(c.pairs.iter().all(|p| p.source == p.target && p.distance == 0.0));
}

#[test]
fn mutuality_filter() {
    let src = set(&[vec![0.0], vec![1.1]]);
    let tgt = set(&[vec![1.0], vec![-1.0]]);
    let c = match_descriptors(&src, &tgt, 1).unwrap();
    assert_eq!(as_pairs(&c), BTreeSet::from([(1, 0)]));
    assert!((c.pairs[0].distance - 0.1).abs() < 1e-12);
}

#[test]
fn matching_equals_oracle_on_200_descriptors() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for k in [1, 2, 3] {
        let src = random_set(&mut rng, 200, 6);
        let tgt = random_set(&mut rng, 180, 6);
        assert_eq!(as_pairs(&match_descriptors(&src, &tgt, k).unwrap()), oracle(&src, &tgt, k));
    }
}

#[test]
fn matching_skips_empty_rows_and_checks_kinds() {
    let mut s = set(&[vec![0.0], vec![0.0], vec![1.0]]);
    s.empty[0] = true;
    let c = match_descriptors(&s, &s, 1).unwrap();
    assert_eq!(as_pairs(&c), BTreeSet::from([(1, 1), (2, 2)]));
    let other = DescriptorSet::new(DescriptorKind::Shot, vec![0], vec![0.0; 352], vec![false]).unwrap();
    assert_eq!(
        match_descriptors(&s, &other, 1),
        Err(AlignError::KindMismatch(DescriptorKind::Pfh, DescriptorKind::Shot))
    );
    assert!(matches!(match_descriptors(&s, &s, 0), Err(AlignError::BadParams(_))));
    s.empty = vec![true; 3];
    assert_eq!(match_descriptors(&s, &s, 1), Err(AlignError::EmptyDescriptors));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn matching_is_symmetric_and_one_to_one(seed in any::<u64>(), n in 1usize..40, m in 1usize..40, k in 1usize..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let src = random_set(&mut rng, n, 4);
        let tgt = random_set(&mut rng, m, 4);
        let fwd = match_descriptors(&src, &tgt, k).unwrap();
        let bwd = match_descriptors(&tgt, &src, k).unwrap();
        prop_assert_eq!(&fwd.transposed(), &bwd);
        let s: BTreeSet<usize> = fwd.pairs.iter().map(|p| p.source).collect();
        let t: BTreeSet<usize> = fwd.pairs.iter().map(|p| p.target).collect();
        prop_assert_eq!(s.len(), fwd.len());
        prop_assert_eq!(t.len(), fwd.len());
        prop_assert_eq!(as_pairs(&fwd), oracle(&src, &tgt, k));
    }

    #[test]
    fn se3_error_is_left_invariant(
        a in prop::array::uniform6(-1.0f64..1.0),
        b in prop::array::uniform6(-1.0f64..1.0),
        c in prop::array::uniform6(-2.0f64..2.0),
    ) {
        let tw = |v: [f64; 6]| RigidTransform::exp(&Twist::new(Vector3::new(v[0], v[1], v[2]), Vector3::new(v[3], v[4], v[5])));
        let (e, r, l) = (tw(a), tw(b), tw(c));
        let d0 = se3_error(&e, &r).unwrap().to_vector();
        let d1 = se3_error(&l.compose(&e), &l.compose(&r)).unwrap().to_vector();
        prop_assert!((d0 - d1).norm() < 1e-9);
        // Composing on the right conjugates the error: its rotation angle is kept.
        let d2 = se3_error(&e.compose(&l), &r.compose(&l)).unwrap();
        prop_assert!((d2.rotation.norm() - d0.fixed_rows::<3>(0).norm()).abs() < 1e-9);
        prop_assert_eq!(se3_error(&e, &e).unwrap().to_vector().norm(), 0.0);
    }
}

fn random_transform(rng: &mut ChaCha8Rng) -> RigidTransform {
    let axis = Vector3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)).normalize();
    let angle = rng.gen_range(0.0..2.8);
    let t = Vector3::new(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
    RigidTransform::exp(&Twist::new(axis * angle, t))
}

fn identity_pairs(n: usize) -> CorrespondenceSet {
    CorrespondenceSet {
        pairs: (0..n)
            .map(|i| Correspondence {
                source: i,
                target: i,
                distance: 0.0,
            })
            .collect(),
    }
}

fn cube_point(rng: &mut ChaCha8Rng) -> Vector3<f64> {
    Vector3::new(rng.gen_range(-2.5..2.5), rng.gen_range(-2.5..2.5), rng.gen_range(-2.5..2.5))
}

#[test]
fn fit_rigid_recovers_exact_transform() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let t = random_transform(&mut rng);
    let src: Vec<_> = (0..10).map(|_| cube_point(&mut rng)).collect();
    let tgt: Vec<_> = src.iter().map(|p| t.apply(p)).collect();
    let est = fit_rigid(&src, &tgt).unwrap();
    assert!(se3_error(&est, &t).unwrap().to_vector().norm() < 1e-12);
    let line: Vec<_> = (0..5).map(|i| Vector3::new(i as f64, 0.0, 0.0)).collect();
    assert!(fit_rigid(&line, &line).is_none());
    assert!(fit_rigid(&src[..2], &tgt[..2]).is_none());
}

#[test]
fn noiseless_consensus_is_exact() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let t = random_transform(&mut rng);
    let src: Vec<_> = (0..20).map(|_| cube_point(&mut rng)).collect();
    let tgt: Vec<_> = src.iter().map(|p| t.apply(p)).collect();
    let r = coarse_align(&identity_pairs(20), &src, &tgt, &CoarseParams::default()).unwrap();
    assert!(se3_error(&r.transform, &t).unwrap().to_vector().norm() < 1e-6);
    assert_eq!((r.inliers, r.features, r.recall), (20, 20, 1.0));
}

/// 30 inliers under `t` with isotropic noise, 70 uniform outliers.
pub(crate) fn contaminated(rng: &mut ChaCha8Rng, t: &RigidTransform, sigma: f64) -> (Vec<Vector3<f64>>, Vec<Vector3<f64>>) {
    let noise = Normal::new(0.0, sigma).unwrap();
    let mut src = Vec::new();
    let mut tgt = Vec::new();
    for i in 0..100 {
        let p = cube_point(rng);
        src.push(p);
        if i % 10 < 3 {
            let e = Vector3::new(noise.sample(rng), noise.sample(rng), noise.sample(rng));
            tgt.push(t.apply(&p) + e);
        } else {
            tgt.push(cube_point(rng));
        }
    }
    (src, tgt)
}

#[test]
fn consensus_rejects_seventy_percent_outliers() {
    let mut ok = 0;
    for trial in 0..30 {
        let mut rng = ChaCha8Rng::seed_from_u64(100 + trial);
        let t = random_transform(&mut rng);
        let (src, tgt) = contaminated(&mut rng, &t, 0.01);
        let params = CoarseParams {
            seed: trial,
            ..Default::default()
        };
        let r = coarse_align(&identity_pairs(100), &src, &tgt, &params).unwrap();
        let e = se3_error(&r.transform, &t).unwrap();
        assert_eq!(r.recall, r.inliers as f64 / 100.0);
        if e.rotation.norm().to_degrees() < 2.0 && (r.transform.translation() - t.translation()).norm() < 0.05 {
            ok += 1;
        }
    }
    assert!(ok >= 29, "{ok}/30");
}

#[test]
fn consensus_is_deterministic_per_seed() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let t = random_transform(&mut rng);
    let (src, tgt) = contaminated(&mut rng, &t, 0.01);
    let p = CoarseParams::default();
    let a = coarse_align(&identity_pairs(100), &src, &tgt, &p).unwrap();
    let b = coarse_align(&identity_pairs(100), &src, &tgt, &p).unwrap();
    assert_eq!(a, b);
}

#[test]
fn inconsistent_correspondences_fail() {
    let src = vec![Vector3::zeros(), Vector3::x(), Vector3::y(), Vector3::z()];
    let tgt = vec![Vector3::new(0.0, 0.0, 5.0), Vector3::new(3.0, 0.0, 0.0), Vector3::new(0.0, -7.0, 0.0), Vector3::new(9.0, 9.0, 0.0)];
    assert!(matches!(
        coarse_align(&identity_pairs(4), &src, &tgt, &CoarseParams::default()),
        Err(AlignError::AlignmentFailed { features: 4, .. })
    ));
    assert_eq!(
        coarse_align(&identity_pairs(2), &src, &tgt, &CoarseParams::default()),
        Err(AlignError::InsufficientCorrespondences(2))
    );
}

#[test]
fn se3_error_examples() {
    let e = RigidTransform::exp(&Twist::new(Vector3::new(0.2, -0.1, 0.4), Vector3::new(1.0, 2.0, -0.5)));
    assert_eq!(se3_error(&e, &e).unwrap().to_vector().norm(), 0.0);
    let xi = Twist::new(Vector3::new(0.05, 0.02, -0.03), Vector3::new(0.1, -0.2, 0.3));
    let r = e.compose(&RigidTransform::exp(&xi));
    assert!((se3_error(&e, &r).unwrap().to_vector() - xi.to_vector()).norm() < 1e-9);
    let shift = RigidTransform::from_translation(Vector3::new(0.1, 0.0, 0.0));
    let d = se3_error(&RigidTransform::identity(), &shift).unwrap();
    assert_eq!(d.rotation.norm(), 0.0);
    assert!((d.translation.norm() - 0.1).abs() < 1e-15);
}

#[test]
fn report_json_round_trip() {
    let mut r = AlignmentReport::new(RigidTransform::rotation_z(0.3), 7, 20, 11);
    r.score(&RigidTransform::identity()).unwrap();
    r.consistency = ResidualStats::from_residuals(vec![0.1, 0.2, 0.3]);
    let json = serde_json::to_string(&r).unwrap();
    assert!(json.contains("\"recall\":0.35"));
    let mut back: AlignmentReport = serde_json::from_str(&json).unwrap();
    assert!((back.transform.to_matrix() - r.transform.to_matrix()).amax() < 1e-12);
    back.transform = r.transform;
    assert_eq!(back, r);
}

#[test]
fn residual_statistics() {
    let s = ResidualStats::from_residuals((1..=100).map(f64::from).collect()).unwrap();
    assert_eq!((s.count, s.mean, s.median), (100, 50.5, 50.5));
    assert!((s.p95 - 95.05).abs() < 1e-12);
    assert!(ResidualStats::from_residuals(Vec::new()).is_none());
}

fn flat_patch() -> PointCloud {
    let mut pts = Vec::new();
    for i in 0..40 {
        for j in 0..40 {
            pts.push(Vector3::new(i as f64 * 0.05, j as f64 * 0.05, 0.0));
        }
    }
    let n = pts.len();
    PointCloud::new(pts).unwrap().with_normals(vec![Vector3::z(); n]).unwrap()
}

#[test]
fn self_consistency_examples() {
    let cloud = terrain(20);
    let s = self_consistency(&cloud, &cloud, &RigidTransform::identity(), 0.25).unwrap();
    assert!(s.mean < 1e-6);
    let patch = flat_patch();
    let lifted = RigidTransform::from_translation(Vector3::new(0.0, 0.0, 0.05));
    let s = self_consistency(&patch, &patch, &lifted, 0.25).unwrap();
    assert!((s.mean - 0.05).abs() < 0.005, "{s:?}");
    let far = RigidTransform::from_translation(Vector3::new(100.0, 0.0, 0.0));
    assert_eq!(self_consistency(&patch, &patch, &far, 0.25), Err(AlignError::NoOverlap(0)));
}

#[test]
fn icp_keeps_aligned_clouds() {
    let cloud = terrain(21);
    let r = fine_align(&cloud, &cloud, &RigidTransform::identity(), &FineParams::default()).unwrap();
    assert!(se3_error(&r.transform, &RigidTransform::identity()).unwrap().to_vector().norm() < 1e-6);
    assert!(r.consistency.unwrap().median < 1e-9);
}

#[test]
fn icp_recovers_small_motions() {
    let cloud = terrain(22);
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    for _ in 0..3 {
        let axis = Vector3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)).normalize();
        let dir = Vector3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)).normalize();
        let motion = RigidTransform::exp(&Twist::new(axis * 5f64.to_radians(), dir * 0.2));
        // Rotate about the cloud centre so the overlap stays large.
        let c = cloud.centroid().unwrap();
        let motion = RigidTransform::from_translation(c).compose(&motion).compose(&RigidTransform::from_translation(-c));
        let src = cloud.transformed(&motion);
        let truth = motion.inverse();
        let r = fine_align(&src, &cloud, &RigidTransform::identity(), &FineParams::default()).unwrap();
        let e = se3_error(&r.transform, &truth).unwrap();
        assert!(e.rotation.norm() < 1e-3 && e.translation.norm() < 1e-3, "{e:?} after {} iterations", r.iterations);
    }
}

#[test]
fn icp_needs_overlap_and_normals() {
    let patch = flat_patch();
    let far = patch.transformed(&RigidTransform::from_translation(Vector3::new(100.0, 0.0, 0.0)));
    assert_eq!(
        fine_align(&far, &patch, &RigidTransform::identity(), &FineParams::default()),
        Err(AlignError::NoOverlap(0))
    );
    let bare = PointCloud::new(patch.points().to_vec()).unwrap();
    assert_eq!(
        fine_align(&bare, &patch, &RigidTransform::identity(), &FineParams::default()),
        Err(AlignError::MissingNormals)
    );
}
