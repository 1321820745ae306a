//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any
//! fails. Pass criterion numbers as arguments to run a subset.

use std::collections::BTreeSet;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use nalgebra::{Rotation3, Unit, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use seareg::alignment::{coarse_align, match_descriptors, se3_error, CoarseParams, Correspondence, CorrespondenceSet};
use seareg::bench::{
    pair_table, prepare_case, run_full_pipeline, run_keypoint_bench, run_matching_bench, BenchConfig, MatchRow,
    FINE_MEDIAN_BOUND, ROTATION_INVARIANT,
};
use seareg::cloud::{estimate_normals, PointCloud, RigidTransform, Twist};
use seareg::colour::{fuse_colours, visible_points, ColourCandidate, ColourizeParams};
use seareg::descriptors::{describe, DescriptorKind, DescriptorParams, DescriptorSet};
use seareg::keypoints::{detect, rotation_sweep, DetectorKind, DetectorParams, SweepVariable, NOISE_LEVELS, ROTATION_ANGLES_DEG, SWEEP_EPSILON};
use seareg::scene::{make_loop_closure, standard_suite, Category, Crossing, LoopClosureCase, SceneSpec, Structure};

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        passed,
        detail: detail.into(),
    }
}

/// Noiseless loop-closure case with submaps cut to `half_extent`.
fn small_case(category: Category, seed: u64, drift: Twist, half_extent: f64, images: usize) -> LoopClosureCase {
    let mut spec = SceneSpec::new(category, seed);
    spec.structure = if seed.is_multiple_of(2) { Structure::Pipe } else { Structure::Wreck };
    let crossing = Crossing {
        pass_length: 4.0,
        angle_deg: 70.0 + 5.0 * (seed % 4) as f64,
        images_per_pass: images,
        ..Default::default()
    };
    let mut case = make_loop_closure(&spec, &crossing, &drift, seed).unwrap();
    case.half_extent = half_extent;
    case
}

fn scene_cloud(category: Category, seed: u64, half_extent: f64) -> PointCloud {
    let case = small_case(category, seed, Twist::zero(), half_extent, 0);
    let raw = case.submap(0).unwrap();
    let res = raw.resolution();
    estimate_normals(&raw, 0.15, Vector3::zeros()).set_resolution(res)
}

fn five_scenes(half_extent: f64) -> Vec<(String, PointCloud)> {
    [
        (Category::Structured, 0),
        (Category::Structured, 1),
        (Category::SemiStructured, 2),
        (Category::Unstructured, 3),
        (Category::Unstructured, 4),
    ]
    .into_iter()
    .map(|(c, s)| (format!("{}-{s}", c.name()), scene_cloud(c, s, half_extent)))
    .collect()
}

fn criterion_1() -> Outcome {
    let expected = [
        (DescriptorKind::Pfh, 125),
        (DescriptorKind::Pfhrgb, 250),
        (DescriptorKind::Shot, 352),
        (DescriptorKind::Cshot, 1344),
        (DescriptorKind::Sc3d, 1980),
        (DescriptorKind::Usc, 1960),
    ];
    let cloud = scene_cloud(Category::Unstructured, 11, 0.6);
    let cloud = {
        let n = cloud.len();
        let res = cloud.resolution();
        cloud.with_colours(vec![[0.4, 0.5, 0.6]; n]).unwrap().set_resolution(res)
    };
    let kp = detect(DetectorKind::Iss, &cloud, &DetectorParams::default()).unwrap();
    let mut bad = Vec::new();
    for (kind, dim) in expected {
        let set = describe(kind, &cloud, &kp, &DescriptorParams::default()).unwrap();
        if kind.dim() != dim || set.dim() != dim || set.data.len() != dim * set.len() {
            bad.push(format!("{kind}: {} / {}", kind.dim(), set.dim()));
        }
    }
    outcome(bad.is_empty(), if bad.is_empty() { "all six dimensions exact".into() } else { bad.join(", ") })
}

fn criterion_2() -> Outcome {
    let start = Instant::now();
    let scenes = five_scenes(1.5);
    let mut worst = (f64::INFINITY, String::new());
    for (name, cloud) in &scenes {
        for kind in ROTATION_INVARIANT {
            let rows = rotation_sweep(cloud, kind, &DetectorParams::default()).unwrap();
            assert_eq!(rows.len(), 19);
            for r in rows {
                if r.r < worst.0 {
                    worst = (r.r, format!("{} on {name} at {}°", kind.name(), r.value));
                }
            }
        }
    }
    let elapsed = start.elapsed();
    let pts: usize = scenes.iter().map(|(_, c)| c.len()).sum();
    outcome(
        worst.0 >= 0.99 && elapsed < Duration::from_secs(120),
        format!("min r {:.4} {} (eps {SWEEP_EPSILON}, {} points over 5 scenes), {:.1} s", worst.0, worst.1, pts, elapsed.as_secs_f64()),
    )
}

fn criterion_3() -> Outcome {
    let clouds = vec![("unstructured-5".to_string(), scene_cloud(Category::Unstructured, 5, 1.0))];
    let config = BenchConfig {
        repetitions: 1,
        ..Default::default()
    };
    let (rows, _) = run_keypoint_bench(&clouds, &config).unwrap();
    let mut problems = Vec::new();
    if rows.len() != 8 * 30 {
        problems.push(format!("{} rows", rows.len()));
    }
    for kind in DetectorKind::ALL {
        let mine: Vec<_> = rows.iter().filter(|r| r.detector == kind).collect();
        let rot: Vec<f64> = mine.iter().filter(|r| r.variable == SweepVariable::Rotation).map(|r| r.value).collect();
        let noise: Vec<f64> = mine.iter().filter(|r| r.variable == SweepVariable::Noise).map(|r| r.value).collect();
        let rot_expected: Vec<f64> = (0..19).map(|i| 10.0 * i as f64).collect();
        let noise_expected: Vec<f64> = (0..11).map(|i| 0.005 * i as f64).collect();
        if rot != rot_expected || rot != ROTATION_ANGLES_DEG {
            problems.push(format!("{kind} rotation levels {rot:?}"));
        }
        let close = noise.len() == 11 && noise.iter().zip(&noise_expected).all(|(a, b)| (a - b).abs() < 1e-15);
        if !close || noise != NOISE_LEVELS {
            problems.push(format!("{kind} noise levels {noise:?}"));
        }
        for r in &mine {
            if r.value == 0.0 && r.r != 1.0 {
                problems.push(format!("{kind} {:?} anchor r = {}", r.variable, r.r));
            }
            if !(0.0..=1.0).contains(&r.r) {
                problems.push(format!("{kind} r = {} out of range", r.r));
            }
        }
    }
    outcome(
        problems.is_empty(),
        if problems.is_empty() { format!("{} sweep points over 8 detectors", rows.len()) } else { problems.join("; ") },
    )
}

fn random_rotation(rng: &mut ChaCha8Rng) -> Rotation3<f64> {
    let axis: [f64; 3] = [0; 3].map(|_| StandardNormal.sample(rng));
    Rotation3::from_axis_angle(&Unit::new_normalize(Vector3::from(axis)), rng.gen_range(0.0..std::f64::consts::PI))
}

fn criterion_4() -> Outcome {
    let start = Instant::now();
    let noise = Normal::new(0.0, 0.01).unwrap();
    let mut good = 0;
    let mut worst = (0.0f64, 0.0f64);
    for trial in 0..100u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(500 + trial);
        let rot = random_rotation(&mut rng);
        let truth = RigidTransform::from_rotation(rot.into_inner())
            .unwrap()
            .compose(&RigidTransform::from_translation(Vector3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))));
        let mut src = Vec::new();
        let mut tgt = Vec::new();
        for i in 0..100 {
            let p = Vector3::new(rng.gen_range(-2.5..2.5), rng.gen_range(-2.5..2.5), rng.gen_range(-2.5..2.5));
            let q = if i % 10 < 3 {
                truth.apply(&p)
            } else {
                Vector3::new(rng.gen_range(-2.5..2.5), rng.gen_range(-2.5..2.5), rng.gen_range(-2.5..2.5))
            };
            let jitter = |rng: &mut ChaCha8Rng| Vector3::new(noise.sample(rng), noise.sample(rng), noise.sample(rng));
            src.push(p + jitter(&mut rng));
            tgt.push(q + jitter(&mut rng));
        }
        let corr = CorrespondenceSet {
            pairs: (0..100).map(|i| Correspondence { source: i, target: i, distance: 0.0 }).collect(),
        };
        let Ok(report) = coarse_align(&corr, &src, &tgt, &CoarseParams::default()) else {
            continue;
        };
        let e = se3_error(&report.transform, &truth).unwrap();
        let (rot_deg, trans) = (e.rotation.norm().to_degrees(), e.translation.norm());
        worst = (worst.0.max(rot_deg), worst.1.max(trans));
        if rot_deg < 2.0 && trans < 0.05 {
            good += 1;
        }
    }
    let elapsed = start.elapsed();
    outcome(
        good >= 95 && elapsed < Duration::from_secs(60),
        format!("{good}/100 within 2°/0.05 m (worst {:.3}°, {:.4} m), {:.1} s", worst.0, worst.1, elapsed.as_secs_f64()),
    )
}

/// Brute-force mutual k-nearest matching: `(i, j)` is a candidate when each
/// is among the other's `k` nearest non-empty rows (ties by index); the
/// candidates are then taken one-to-one in order of distance.
fn matching_oracle(src: &DescriptorSet, tgt: &DescriptorSet, k: usize) -> BTreeSet<(usize, usize)> {
    let d2 = |i: usize, j: usize| -> f64 { src.row(i).iter().zip(tgt.row(j)).map(|(a, b)| (a - b) * (a - b)).sum() };
    let si: Vec<usize> = (0..src.len()).filter(|&i| !src.empty[i]).collect();
    let tj: Vec<usize> = (0..tgt.len()).filter(|&j| !tgt.empty[j]).collect();
    let knn = |mut list: Vec<(f64, usize)>| -> Vec<usize> {
        list.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        list.into_iter().take(k).map(|x| x.1).collect()
    };
    let mut cands = Vec::new();
    for &i in &si {
        for j in knn(tj.iter().map(|&j| (d2(i, j), j)).collect()) {
            if knn(si.iter().map(|&a| (d2(a, j), a)).collect()).contains(&i) {
                cands.push((d2(i, j), i, j));
            }
        }
    }
    cands.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let (mut us, mut ut) = (BTreeSet::new(), BTreeSet::new());
    let mut out = BTreeSet::new();
    for (_, i, j) in cands {
        if !us.contains(&i) && !ut.contains(&j) {
            us.insert(i);
            ut.insert(j);
            out.insert((i, j));
        }
    }
    out
}

fn random_set(rng: &mut ChaCha8Rng, kind: DescriptorKind, n: usize, coarse: bool) -> DescriptorSet {
    let dim = kind.dim();
    let data = (0..n * dim)
        .map(|_| if coarse { rng.gen_range(0..3) as f64 } else { rng.gen_range(0.0..1.0) })
        .collect();
    let empty = (0..n).map(|_| rng.gen_bool(0.05)).collect();
    DescriptorSet::new(kind, (0..n).collect(), data, empty).unwrap()
}

fn criterion_5() -> Outcome {
    let start = Instant::now();
    let mut mismatches = Vec::new();
    let mut total_pairs = 0;
    for inst in 0..50u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(900 + inst);
        let kind = [DescriptorKind::Pfh, DescriptorKind::Shot][inst as usize % 2];
        let (n, m) = (rng.gen_range(1..=300), rng.gen_range(1..=300));
        // Every fifth instance draws from {0, 1, 2} to force distance ties.
        let coarse = inst % 5 == 4;
        let (src, tgt) = (random_set(&mut rng, kind, n, coarse), random_set(&mut rng, kind, m, coarse));
        let k = 1 + (inst as usize % 3);
        let expected = matching_oracle(&src, &tgt, k);
        let got: BTreeSet<(usize, usize)> = match match_descriptors(&src, &tgt, k) {
            Ok(c) => c.pairs.iter().map(|p| (p.source, p.target)).collect(),
            Err(_) => BTreeSet::new(),
        };
        total_pairs += expected.len();
        if got != expected {
            mismatches.push(inst);
        }
    }
    let elapsed = start.elapsed();
    outcome(
        mismatches.is_empty() && elapsed < Duration::from_secs(30),
        format!("50 instances, {total_pairs} oracle pairs, mismatching instances {mismatches:?}, {:.1} s", elapsed.as_secs_f64()),
    )
}

enum Surface {
    Sphere { centre: Vector3<f64>, radius: f64 },
    /// Axis-aligned square in the plane `z = height`.
    Square { height: f64, half: f64 },
}

impl Surface {
    /// Smallest ray parameter in (0, ∞) at which `origin + t·dir` meets the surface.
    fn hit(&self, origin: &Vector3<f64>, dir: &Vector3<f64>) -> Option<f64> {
        match *self {
            Surface::Sphere { centre, radius } => {
                let oc = origin - centre;
                let (a, b, c) = (dir.dot(dir), 2.0 * oc.dot(dir), oc.dot(&oc) - radius * radius);
                let disc = b * b - 4.0 * a * c;
                if disc < 0.0 {
                    return None;
                }
                let t = (-b - disc.sqrt()) / (2.0 * a);
                (t > 0.0).then_some(t)
            }
            Surface::Square { height, half } => {
                if dir.z == 0.0 {
                    return None;
                }
                let t = (height - origin.z) / dir.z;
                let p = origin + dir * t;
                (t > 0.0 && p.x.abs() <= half && p.y.abs() <= half).then_some(t)
            }
        }
    }
}

/// Visible when no surface is met before the point along the camera ray.
fn ray_cast_visible(points: &[Vector3<f64>], camera: &Vector3<f64>, surfaces: &[Surface]) -> Vec<bool> {
    points
        .iter()
        .map(|p| {
            let dir = p - camera;
            surfaces.iter().filter_map(|s| s.hit(camera, &dir)).all(|t| t >= 1.0 - 1e-9)
        })
        .collect()
}

fn agreement(points: &[Vector3<f64>], camera: &Vector3<f64>, surfaces: &[Surface]) -> f64 {
    let truth = ray_cast_visible(points, camera, surfaces);
    let mut seen = vec![false; points.len()];
    for i in visible_points(points, camera, ColourizeParams::default().gamma).unwrap() {
        seen[i] = true;
    }
    seen.iter().zip(&truth).filter(|(a, b)| a == b).count() as f64 / points.len() as f64
}

fn criterion_6() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(61);
    let r = 1.5;
    let sphere: Vec<Vector3<f64>> = (0..5000)
        .map(|_| {
            let v: [f64; 3] = [0; 3].map(|_| StandardNormal.sample(&mut rng));
            Vector3::from(v).normalize() * r
        })
        .collect();
    let a_sphere = agreement(&sphere, &Vector3::new(0.4, -0.3, 3.0 * r), &[Surface::Sphere { centre: Vector3::zeros(), radius: r }]);

    // A small near square partly shadowing a large far one.
    let mut planes = Vec::new();
    for _ in 0..2000 {
        planes.push(Vector3::new(rng.gen_range(-0.8..0.8), rng.gen_range(-0.8..0.8), 2.0));
    }
    for _ in 0..4000 {
        planes.push(Vector3::new(rng.gen_range(-2.5..2.5), rng.gen_range(-2.5..2.5), 4.0));
    }
    let surfaces = [Surface::Square { height: 2.0, half: 0.8 }, Surface::Square { height: 4.0, half: 2.5 }];
    let cam = Vector3::zeros();
    let hidden = ray_cast_visible(&planes, &cam, &surfaces).iter().filter(|v| !**v).count();
    let a_planes = agreement(&planes, &cam, &surfaces);
    let elapsed = start.elapsed();
    outcome(
        a_sphere >= 0.95 && a_planes >= 0.95 && elapsed < Duration::from_secs(30),
        format!(
            "sphere {:.2}%, two planes {:.2}% ({hidden} of {} occluded), {:.1} s",
            100.0 * a_sphere,
            100.0 * a_planes,
            planes.len(),
            elapsed.as_secs_f64()
        ),
    )
}

fn criterion_7() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut problems = Vec::new();
    for trial in 0..10_000 {
        let n = rng.gen_range(1..=8);
        let cands: Vec<ColourCandidate> = (0..n)
            .map(|_| ColourCandidate {
                colour: [rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0)],
                weight: 10f64.powf(rng.gen_range(-6.0..3.0)),
            })
            .collect();
        let f = fuse_colours(&cands).unwrap();
        for ch in 0..3 {
            let lo = cands.iter().map(|c| c.colour[ch]).fold(f64::INFINITY, f64::min);
            let hi = cands.iter().map(|c| c.colour[ch]).fold(f64::NEG_INFINITY, f64::max);
            if !(lo <= f[ch] && f[ch] <= hi) {
                problems.push(format!("trial {trial} channel {ch}: {} outside [{lo}, {hi}]", f[ch]));
            }
        }
        if n == 1 && f != cands[0].colour {
            problems.push(format!("trial {trial}: single candidate changed"));
        }
        let equal: Vec<ColourCandidate> = cands.iter().map(|c| ColourCandidate { weight: 0.7, ..*c }).collect();
        let g = fuse_colours(&equal).unwrap();
        for ch in 0..3 {
            let mean = cands.iter().map(|c| c.colour[ch]).sum::<f64>() / n as f64;
            if (g[ch] - mean).abs() > 1e-12 {
                problems.push(format!("trial {trial}: equal-weight mean off by {}", (g[ch] - mean).abs()));
            }
        }
    }
    let hand = fuse_colours(&[
        ColourCandidate { colour: [1.0, 0.0, 0.0], weight: 1.0 },
        ColourCandidate { colour: [0.0, 0.0, 1.0], weight: 3.0 },
    ])
    .unwrap();
    let hand_ok = (hand[0] - 0.25).abs() <= 1e-12 && hand[1].abs() <= 1e-12 && (hand[2] - 0.75).abs() <= 1e-12;
    if !hand_ok {
        problems.push(format!("hand case gave {hand:?}"));
    }
    problems.truncate(5);
    outcome(
        problems.is_empty(),
        if problems.is_empty() { format!("10^4 fusions in bounds, hand case {hand:?}") } else { problems.join("; ") },
    )
}

fn criterion_8() -> Outcome {
    let start = Instant::now();
    let config = BenchConfig::default();
    let suite = standard_suite(config.suite_seed);
    let mut eligible = 0;
    let mut failures = Vec::new();
    let mut worst_fine = 0.0f64;
    let mut medians = [Vec::new(), Vec::new(), Vec::new()];
    for spec in &suite {
        let rho = spec.perturbation.translation.norm();
        if !(0.1..=0.5).contains(&rho) {
            continue;
        }
        eligible += 1;
        let case = prepare_case(&spec.generate().unwrap(), &config).unwrap();
        match run_full_pipeline(&case, DetectorKind::Iss, DescriptorKind::Usc, &config) {
            Ok(r) => {
                let m = r.medians();
                for k in 0..3 {
                    medians[k].push(m[k]);
                }
                worst_fine = worst_fine.max(m[2]);
                if !(r.is_monotone() && m[2] < FINE_MEDIAN_BOUND) {
                    failures.push(format!("{} {:?}", spec.name, m));
                }
            }
            Err(e) => failures.push(format!("{}: {e}", spec.name)),
        }
    }
    let elapsed = start.elapsed();
    let mean = |v: &Vec<f64>| v.iter().sum::<f64>() / v.len().max(1) as f64;
    failures.truncate(5);
    outcome(
        failures.is_empty() && eligible == suite.len() && elapsed < Duration::from_secs(15 * 60),
        format!(
            "{eligible}/{} cases eligible, failures {:?}, mean medians {:.4} > {:.4} > {:.4} m, worst fine {:.4} m, {:.0} s",
            suite.len(),
            failures,
            mean(&medians[0]),
            mean(&medians[1]),
            mean(&medians[2]),
            worst_fine,
            elapsed.as_secs_f64()
        ),
    )
}

fn criterion_9() -> Outcome {
    let config = BenchConfig {
        repetitions: 1,
        ..Default::default()
    };
    let drift = Twist::new(Vector3::new(0.01, -0.02, 0.03), Vector3::new(0.15, 0.2, -0.05));
    let cases: Vec<_> = [(Category::Structured, 21), (Category::SemiStructured, 22), (Category::Unstructured, 23)]
        .into_iter()
        .map(|(c, s)| prepare_case(&small_case(c, s, drift, 1.25, 2), &config).unwrap())
        .collect();
    let first = run_matching_bench(&cases, &config).unwrap();
    let second = run_matching_bench(&cases, &config).unwrap();
    let strip = |rows: &[MatchRow]| rows.iter().map(MatchRow::without_timings).collect::<Vec<_>>();
    let table = pair_table(&first, &config);
    let detectors: BTreeSet<_> = table.iter().map(|c| c.detector).collect();
    let descriptors: BTreeSet<_> = table.iter().map(|c| c.descriptor).collect();
    let cells: BTreeSet<_> = first.iter().map(|r| (r.case.clone(), r.detector, r.descriptor)).collect();
    let typed = first.iter().all(|r| r.success != (r.failure_stage.is_some() && r.failure_reason.is_some()));
    let complete = table.len() == 48 && detectors.len() == 8 && descriptors.len() == 6 && table.iter().all(|c| c.cases == cases.len());
    let one_each = first.len() == 48 * cases.len() && cells.len() == first.len();
    let repeat = strip(&first) == strip(&second);
    let successes = first.iter().filter(|r| r.success).count();
    outcome(
        complete && one_each && typed && repeat,
        format!(
            "{} cells ({}×{}), {} rows over {} cases, {successes} successes, typed {typed}, deterministic {repeat}",
            table.len(),
            detectors.len(),
            descriptors.len(),
            first.len(),
            cases.len()
        ),
    )
}

fn criterion_10() -> Outcome {
    let mut worst = 0.0f64;
    let mut rows = 0;
    for (seed, grey) in [(31u64, 0.2), (32, 0.5), (33, 0.8)] {
        let cloud = scene_cloud(Category::SemiStructured, seed, 1.0);
        let n = cloud.len();
        let res = cloud.resolution();
        let cloud = cloud.with_colours(vec![[grey; 3]; n]).unwrap().set_resolution(res);
        let kp = detect(DetectorKind::Iss, &cloud, &DetectorParams::default()).unwrap();
        let plain = describe(DescriptorKind::Pfh, &cloud, &kp, &DescriptorParams::default()).unwrap();
        let rgb = describe(DescriptorKind::Pfhrgb, &cloud, &kp, &DescriptorParams::default()).unwrap();
        for i in 0..plain.len() {
            let (a, b) = (plain.row(i), rgb.row(i));
            for k in 0..125 {
                worst = worst.max((a[k] - b[k]).abs());
            }
            rows += 1;
        }
    }
    outcome(worst <= 1e-9 && rows > 0, format!("{rows} keypoints on three grey levels, max difference {worst:.2e}"))
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("descriptor dimensions", criterion_1),
        ("rotation invariance", criterion_2),
        ("repeatability anchors and bounds", criterion_3),
        ("coarse alignment robustness", criterion_4),
        ("mutual matching oracle", criterion_5),
        ("visibility oracle", criterion_6),
        ("colour fusion", criterion_7),
        ("full-pipeline staging", criterion_8),
        ("grid completeness", criterion_9),
        ("grey colour descriptors", criterion_10),
    ];
    let wanted: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let id = i + 1;
        if !wanted.is_empty() && !wanted.contains(&id) {
            continue;
        }
        let start = Instant::now();
        let result = std::panic::catch_unwind(run).unwrap_or_else(|e| {
            let msg = e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()));
            outcome(false, format!("panicked: {}", msg.unwrap_or_default()))
        });
        if !result.passed {
            failed += 1;
        }
        println!(
            "{} criterion {id:>2} ({name}): {} [{:.1} s]",
            if result.passed { "PASS" } else { "FAIL" },
            result.detail,
            start.elapsed().as_secs_f64()
        );
    }
    println!("acceptance: {} failed", failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
