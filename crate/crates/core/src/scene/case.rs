//! Loop-closure cases: two passes over a shared patch of seabed, the second
//! one corrupted by navigation drift.

use std::f64::consts::PI;
use std::fs::{self, File};
use std::path::Path;

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{generate_scene, render_image, simulate_scan, straight_pass, Category, LaserParams, SceneError, SceneSpec, Structure};
use crate::cloud::{PointCloud, RigidTransform, Twist};
use crate::colour::{CameraModel, PosedImage};
use crate::submap::io::{load_scan_lines, load_trajectory, read_poses, save_scan_lines, save_trajectory, write_poses, IoError};
use crate::submap::{build_submap, ScanLine, SensorRig, SubmapError, SubmapSpec, Trajectory};

/// Structured, semi-structured and unstructured cases in the standard suite.
pub const CATEGORY_COUNTS: [(Category, usize); 3] =
    [(Category::Structured, 28), (Category::SemiStructured, 24), (Category::Unstructured, 66)];

const MAX_DRIFT_ROTATION_DEG: f64 = 10.0;
const MAX_DRIFT_TRANSLATION: f64 = 0.5;

/// Geometry of the two passes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Crossing {
    /// Heading of the first pass, degrees from the world x axis.
    pub heading_deg: f64,
    /// Heading of the second pass relative to the first.
    pub angle_deg: f64,
    /// Where the second pass crosses, relative to the first pass's centre.
    pub offset: [f64; 2],
    pub altitude: f64,
    /// Metres per second.
    pub speed: f64,
    pub pass_length: f64,
    pub wobble_deg: f64,
    pub range_noise: f64,
    pub images_per_pass: usize,
}

impl Default for Crossing {
    fn default() -> Self {
        Self {
            heading_deg: 0.0,
            angle_deg: 90.0,
            offset: [0.0, 0.0],
            altitude: 3.0,
            speed: 0.5,
            pass_length: 7.0,
            wobble_deg: 1.0,
            range_noise: 0.0,
            images_per_pass: 0,
        }
    }
}

/// Everything needed to generate one case.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseSpec {
    pub name: String,
    pub scene: SceneSpec,
    #[serde(default)]
    pub crossing: Crossing,
    #[serde(default)]
    pub perturbation: Twist,
    #[serde(default)]
    pub seed: u64,
}

impl CaseSpec {
    pub fn generate(&self) -> Result<LoopClosureCase, SceneError> {
        let mut case = make_loop_closure(&self.scene, &self.crossing, &self.perturbation, self.seed)?;
        case.name = self.name.clone();
        Ok(case)
    }
}

/// Default sensor extrinsics: laser just aft of the body origin, camera
/// forward and looking straight down.
pub fn default_rig() -> SensorRig {
    let down = RigidTransform::exp(&Twist::new(Vector3::new(PI, 0.0, 0.0), Vector3::zeros()));
    SensorRig {
        laser: RigidTransform::from_translation(Vector3::new(-0.2, 0.0, -0.1)),
        camera: RigidTransform::from_translation(Vector3::new(0.3, 0.0, -0.1)).compose(&down),
    }
}

pub fn default_camera() -> CameraModel {
    CameraModel::new(110.0, 110.0, 80.0, 60.0, 160, 120).expect("valid intrinsics")
}

#[derive(Debug, Clone)]
pub struct LoopClosureCase {
    pub name: String,
    pub scene: SceneSpec,
    pub rig: SensorRig,
    pub camera: CameraModel,
    pub half_extent: f64,
    pub grid: f64,
    /// Laser lines of each pass, laser frame.
    pub lines: [Vec<ScanLine>; 2],
    /// Navigation solutions; the second carries the drift.
    pub trajectories: [Trajectory; 2],
    /// Loop-closure time of each pass.
    pub tau: [f64; 2],
    /// Maps submap-2 coordinates into submap 1.
    pub truth: RigidTransform,
    pub perturbation: Twist,
    /// Capture time and image, with the navigation pose (world from body).
    pub images: [Vec<(f64, PosedImage)>; 2],
}

impl LoopClosureCase {
    pub fn category(&self) -> Category {
        self.scene.category
    }

    pub fn submap_spec(&self, pass: usize) -> SubmapSpec {
        SubmapSpec {
            t_tau: self.tau[pass],
            half_extent: self.half_extent,
            grid: self.grid,
        }
    }

    /// Submap of one pass (0 or 1) in the body frame at its loop-closure time.
    pub fn submap(&self, pass: usize) -> Result<PointCloud, SubmapError> {
        build_submap(&self.lines[pass], &self.trajectories[pass], &self.rig, &self.submap_spec(pass))
    }

    /// Relative pose predicted by navigation alone.
    pub fn initial_estimate(&self) -> RigidTransform {
        let a = self.trajectories[0].pose_at(self.tau[0]).expect("tau inside pass");
        let b = self.trajectories[1].pose_at(self.tau[1]).expect("tau inside pass");
        a.inverse().compose(&b)
    }

    /// Images of one pass with poses resolved in that pass's submap frame.
    pub fn submap_images(&self, pass: usize) -> Vec<PosedImage> {
        let anchor = self.trajectories[pass].pose_at(self.tau[pass]).expect("tau inside pass").inverse();
        self.images[pass]
            .iter()
            .map(|(_, img)| PosedImage {
                image: img.image.clone(),
                body_pose: anchor.compose(&img.body_pose),
            })
            .collect()
    }
}

/// Simulates two passes over a fresh scene. The second pass's navigation is
/// the truth left-multiplied by a constant world drift chosen so that the
/// navigation-only relative pose equals `truth · exp(-perturbation)`.
pub fn make_loop_closure(
    spec: &SceneSpec,
    crossing: &Crossing,
    perturbation: &Twist,
    seed: u64,
) -> Result<LoopClosureCase, SceneError> {
    let rotation_deg = perturbation.rotation.norm().to_degrees();
    let translation = perturbation.translation.norm();
    if !(rotation_deg <= MAX_DRIFT_ROTATION_DEG && translation <= MAX_DRIFT_TRANSLATION) {
        return Err(SceneError::PerturbationTooLarge { rotation_deg, translation });
    }
    if !(crossing.altitude > 0.0 && crossing.speed > 0.0 && crossing.pass_length > 0.0) {
        return Err(SceneError::BadSpec("altitude, speed and pass length must be positive"));
    }
    let scene = generate_scene(spec)?;
    let rig = default_rig();
    let camera = default_camera();
    let mut laser = LaserParams {
        range_noise: crossing.range_noise,
        ..Default::default()
    };
    let along = crossing.speed / laser.line_rate;
    let across = 1.0 / (spec.resolution * along);
    let swath = 2.0 * crossing.altitude * laser.fan_half_angle_deg.to_radians().tan();
    laser.rays = (swath / across).ceil() as usize + 1;

    let h1 = crossing.heading_deg.to_radians();
    let h2 = h1 + crossing.angle_deg.to_radians();
    let pass = |centre: [f64; 2], heading: f64, s: u64| {
        straight_pass(centre, heading, crossing.pass_length, crossing.altitude, crossing.speed, crossing.wobble_deg, s)
    };
    let truth_traj = [pass([0.0, 0.0], h1, seed.wrapping_mul(2)), pass(crossing.offset, h2, seed.wrapping_mul(2) + 1)];
    let tau = [truth_traj[0].end() / 2.0, truth_traj[1].end() / 2.0];
    let lines = [
        simulate_scan(&scene, &truth_traj[0], &rig, &laser, seed ^ 0x11),
        simulate_scan(&scene, &truth_traj[1], &rig, &laser, seed ^ 0x22),
    ];
    let anchor1 = truth_traj[0].pose_at(tau[0])?;
    let anchor2 = truth_traj[1].pose_at(tau[1])?;
    let truth = anchor1.inverse().compose(&anchor2);
    let drift = anchor2
        .compose(&RigidTransform::exp(&Twist::new(-perturbation.rotation, -perturbation.translation)))
        .compose(&anchor2.inverse());
    let believed = [truth_traj[0].clone(), truth_traj[1].reframed(&drift)];

    let mut images: [Vec<(f64, PosedImage)>; 2] = [Vec::new(), Vec::new()];
    let n = crossing.images_per_pass;
    for k in 0..2 {
        for i in 0..n {
            let spread = if n == 1 { 0.0 } else { -1.0 + 2.0 * i as f64 / (n - 1) as f64 };
            let t = (tau[k] + spread * 4.0 / crossing.speed).clamp(truth_traj[k].start(), truth_traj[k].end());
            let pose = truth_traj[k].pose_at(t)?;
            let image = render_image(&scene, &camera, &pose.compose(&rig.camera));
            images[k].push((
                t,
                PosedImage {
                    image,
                    body_pose: believed[k].pose_at(t)?,
                },
            ));
        }
    }
    Ok(LoopClosureCase {
        name: format!("{}-{seed}", spec.category.name()),
        scene: spec.clone(),
        rig,
        camera,
        half_extent: SubmapSpec::DEFAULT_HALF_EXTENT,
        grid: SubmapSpec::DEFAULT_GRID,
        lines,
        trajectories: believed,
        tau,
        truth,
        perturbation: *perturbation,
        images,
    })
}

fn random_unit(rng: &mut ChaCha8Rng) -> Vector3<f64> {
    loop {
        let v = Vector3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        let n = v.norm();
        if n > 1e-3 && n <= 1.0 {
            return v / n;
        }
    }
}

/// The 118-case suite: category mix of [`CATEGORY_COUNTS`], crossing
/// angles in 30–150°, drift of 1–5° and 0.1–0.5 m.
pub fn standard_suite(seed: u64) -> Vec<CaseSpec> {
    let mut out = Vec::new();
    let mut index = 0u64;
    for (category, count) in CATEGORY_COUNTS {
        for i in 0..count {
            let case_seed = seed.wrapping_add(index);
            index += 1;
            let mut rng = ChaCha8Rng::seed_from_u64(case_seed ^ 0xca5e);
            let mut scene = SceneSpec::new(category, case_seed);
            scene.structure = if i % 2 == 0 { Structure::Pipe } else { Structure::Wreck };
            let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
            let r = rng.gen_range(0.0..0.75f64).sqrt() * 0.75f64.sqrt();
            let a = rng.gen_range(0.0..2.0 * PI);
            let crossing = Crossing {
                heading_deg: rng.gen_range(0.0..360.0),
                angle_deg: sign * rng.gen_range(30.0..150.0),
                offset: [r * a.cos(), r * a.sin()],
                ..Default::default()
            };
            let rot = random_unit(&mut rng) * rng.gen_range(1.0f64..5.0).to_radians();
            let trans = random_unit(&mut rng) * rng.gen_range(0.1..0.5);
            out.push(CaseSpec {
                name: format!("{}-{:03}", category.name(), i),
                scene,
                crossing,
                perturbation: Twist::new(rot, trans),
                seed: case_seed,
            });
        }
    }
    out
}

#[derive(Serialize, Deserialize)]
struct CaseMeta {
    name: String,
    scene: SceneSpec,
    rig: SensorRig,
    camera: CameraModel,
    half_extent: f64,
    grid: f64,
    tau: [f64; 2],
    images: [Vec<String>; 2],
}

#[derive(Serialize, Deserialize)]
struct Truth {
    /// Row-major 4×4, maps submap 2 into submap 1.
    t_z2z1: RigidTransform,
    /// Navigation drift applied to the second pass, `[phi; rho]`.
    perturbation: Twist,
    initial: RigidTransform,
}

/// Writes `case.json`, `truth.json`, `lines_{1,2}.bin`,
/// `trajectory_{1,2}.csv` and `images/pass{1,2}_NNN.png` with `.csv` pose
/// sidecars.
pub fn save_case(dir: impl AsRef<Path>, case: &LoopClosureCase) -> Result<(), SceneError> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir.join("images")).map_err(IoError::from)?;
    let mut names: [Vec<String>; 2] = [Vec::new(), Vec::new()];
    for k in 0..2 {
        save_scan_lines(dir.join(format!("lines_{}.bin", k + 1)), &case.lines[k])?;
        save_trajectory(dir.join(format!("trajectory_{}.csv", k + 1)), &case.trajectories[k])?;
        for (i, (t, img)) in case.images[k].iter().enumerate() {
            let name = format!("images/pass{}_{i:03}.png", k + 1);
            img.image
                .save(dir.join(&name))
                .map_err(|e| SceneError::Image(crate::colour::ImageLoadError::Image(e)))?;
            let sidecar = File::create(dir.join(&name).with_extension("csv")).map_err(IoError::from)?;
            write_poses(sidecar, &[(*t, img.body_pose)])?;
            names[k].push(name);
        }
    }
    let meta = CaseMeta {
        name: case.name.clone(),
        scene: case.scene.clone(),
        rig: case.rig,
        camera: case.camera,
        half_extent: case.half_extent,
        grid: case.grid,
        tau: case.tau,
        images: names,
    };
    let truth = Truth {
        t_z2z1: case.truth,
        perturbation: case.perturbation,
        initial: case.initial_estimate(),
    };
    write_json(&dir.join("case.json"), &meta)?;
    write_json(&dir.join("truth.json"), &truth)?;
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), SceneError> {
    let f = File::create(path).map_err(IoError::from)?;
    serde_json::to_writer_pretty(std::io::BufWriter::new(f), value)?;
    Ok(())
}

pub fn load_case(dir: impl AsRef<Path>) -> Result<LoopClosureCase, SceneError> {
    let dir = dir.as_ref();
    let open = |name: &str| File::open(dir.join(name)).map_err(|e| SceneError::Io(IoError::from(e)));
    let meta: CaseMeta = serde_json::from_reader(std::io::BufReader::new(open("case.json")?))?;
    let truth: Truth = serde_json::from_reader(std::io::BufReader::new(open("truth.json")?))?;
    let mut images: [Vec<(f64, PosedImage)>; 2] = [Vec::new(), Vec::new()];
    for k in 0..2 {
        for name in &meta.images[k] {
            let path = dir.join(name);
            let sidecar = File::open(path.with_extension("csv")).map_err(IoError::from)?;
            let &(t, pose) = read_poses(sidecar)?.first().ok_or(crate::colour::ImageLoadError::EmptySidecar)?;
            let img = PosedImage::load(&path, pose).map_err(|e| SceneError::Image(e.into()))?;
            images[k].push((t, img));
        }
    }
    Ok(LoopClosureCase {
        name: meta.name,
        scene: meta.scene,
        rig: meta.rig,
        camera: meta.camera,
        half_extent: meta.half_extent,
        grid: meta.grid,
        lines: [load_scan_lines(dir.join("lines_1.bin"))?, load_scan_lines(dir.join("lines_2.bin"))?],
        trajectories: [load_trajectory(dir.join("trajectory_1.csv"))?, load_trajectory(dir.join("trajectory_2.csv"))?],
        tau: meta.tau,
        truth: truth.t_z2z1,
        perturbation: truth.perturbation,
        images,
    })
}
