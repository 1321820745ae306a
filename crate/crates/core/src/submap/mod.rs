//! Submap assembly from laser scan lines registered through the vehicle trajectory.
//!
//! A point `r` measured in the laser frame at time `t_k` lands in the body
//! frame at the loop-closure time `t_tau` as
//! `T(t_tau)^-1 · T(t_k) · T_body_laser · r`.

pub mod io;

use nalgebra::Vector3;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cloud::{voxel_downsample, Point, PointCloud, RigidTransform};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SubmapError {
    #[error("time {t} outside trajectory span [{start}, {end}]")]
    OutOfRange { t: f64, start: f64, end: f64 },
    #[error("trajectory needs at least two samples with strictly increasing timestamps")]
    BadTrajectory,
    #[error("no points survived windowing")]
    EmptySubmap,
    #[error("invalid submap spec: {0}")]
    BadSpec(&'static str),
}

/// One laser profile, points in the laser frame.
#[derive(Debug, Clone, PartialEq)]
pub struct ScanLine {
    pub timestamp: f64,
    pub points: Vec<Point>,
}

/// Time-stamped world-from-body poses.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    samples: Vec<(f64, RigidTransform)>,
}

impl Trajectory {
    pub fn new(samples: Vec<(f64, RigidTransform)>) -> Result<Self, SubmapError> {
        if samples.len() < 2 || samples.windows(2).any(|w| !(w[1].0 > w[0].0)) {
            return Err(SubmapError::BadTrajectory);
        }
        Ok(Self { samples })
    }

    pub fn samples(&self) -> &[(f64, RigidTransform)] {
        &self.samples
    }

    pub fn start(&self) -> f64 {
        self.samples[0].0
    }

    pub fn end(&self) -> f64 {
        self.samples[self.samples.len() - 1].0
    }

    /// Pose at `t`: slerp on rotation, lerp on translation between the bracketing samples.
    pub fn pose_at(&self, t: f64) -> Result<RigidTransform, SubmapError> {
        if !(t >= self.start() && t <= self.end()) {
            return Err(SubmapError::OutOfRange {
                t,
                start: self.start(),
                end: self.end(),
            });
        }
        let hi = self.samples.partition_point(|(ts, _)| *ts < t);
        if self.samples[hi].0 == t {
            return Ok(self.samples[hi].1);
        }
        let (t0, a) = &self.samples[hi - 1];
        let (t1, b) = &self.samples[hi];
        Ok(a.interpolate(b, (t - t0) / (t1 - t0)))
    }

    /// Left-multiplies every pose by `world`.
    pub fn reframed(&self, world: &RigidTransform) -> Trajectory {
        Trajectory {
            samples: self.samples.iter().map(|(t, p)| (*t, world.compose(p))).collect(),
        }
    }
}

/// Free function form of [`Trajectory::pose_at`].
pub fn pose_at(traj: &Trajectory, t: f64) -> Result<RigidTransform, SubmapError> {
    traj.pose_at(t)
}

/// Static sensor extrinsics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[derive(Default)]
pub struct SensorRig {
    /// body-from-laser
    pub laser: RigidTransform,
    /// body-from-camera
    pub camera: RigidTransform,
}


#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SubmapSpec {
    /// Loop-closure time the submap is resolved at.
    pub t_tau: f64,
    /// Half the side of the square horizontal window, metres.
    pub half_extent: f64,
    /// Voxel grid size, metres.
    pub grid: f64,
}

impl SubmapSpec {
    pub const DEFAULT_HALF_EXTENT: f64 = 2.5;
    pub const DEFAULT_GRID: f64 = 0.05;

    pub fn at(t_tau: f64) -> Self {
        Self {
            t_tau,
            half_extent: Self::DEFAULT_HALF_EXTENT,
            grid: Self::DEFAULT_GRID,
        }
    }

    fn validate(&self) -> Result<(), SubmapError> {
        if !(self.half_extent > 0.0) {
            return Err(SubmapError::BadSpec("half_extent must be positive"));
        }
        if !(self.grid > 0.0) {
            return Err(SubmapError::BadSpec("grid must be positive"));
        }
        Ok(())
    }
}

/// Registers and windows the lines without downsampling.
///
/// Lines whose timestamp falls outside the trajectory span are skipped.
pub fn register_lines(
    lines: &[ScanLine],
    traj: &Trajectory,
    rig: &SensorRig,
    spec: &SubmapSpec,
) -> Result<PointCloud, SubmapError> {
    spec.validate()?;
    let anchor_inv = traj.pose_at(spec.t_tau)?.inverse();
    let mut points = Vec::new();
    for line in lines {
        let Ok(pose) = traj.pose_at(line.timestamp) else {
            continue;
        };
        let to_anchor = anchor_inv.compose(&pose).compose(&rig.laser);
        points.extend(
            line.points
                .iter()
                .map(|p| to_anchor.apply(p))
                .filter(|q| q.x.abs() <= spec.half_extent && q.y.abs() <= spec.half_extent),
        );
    }
    if points.is_empty() {
        return Err(SubmapError::EmptySubmap);
    }
    PointCloud::new(points).map_err(|_| SubmapError::EmptySubmap)
}

/// Registered, windowed and voxel-downsampled submap in the body frame at `spec.t_tau`.
pub fn build_submap(
    lines: &[ScanLine],
    traj: &Trajectory,
    rig: &SensorRig,
    spec: &SubmapSpec,
) -> Result<PointCloud, SubmapError> {
    let raw = register_lines(lines, traj, rig, spec)?;
    Ok(voxel_downsample(&raw, spec.grid))
}

/// Adds i.i.d. zero-mean Gaussian noise of standard deviation `sigma` to every coordinate.
pub fn add_noise(cloud: &PointCloud, sigma: f64, seed: u64) -> PointCloud {
    assert!(sigma >= 0.0, "noise sigma must be non-negative");
    if sigma == 0.0 {
        return cloud.clone();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, sigma).expect("finite sigma");
    let points = cloud
        .points()
        .iter()
        .map(|p| p + Vector3::from_fn(|_, _| normal.sample(&mut rng)))
        .collect();
    let mut out = PointCloud::new(points).expect("finite noise");
    if let Some(n) = cloud.normals() {
        out = out.with_normals(n.to_vec()).expect("same length");
    }
    if let Some(c) = cloud.colours() {
        out = out.with_colours(c.to_vec()).expect("same length");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn straight_traj(speed: f64) -> Trajectory {
        Trajectory::new(
            (0..=10)
                .map(|i| {
                    let t = i as f64;
                    (t, RigidTransform::from_translation(Vector3::new(speed * t, 0.0, 0.0)))
                })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn pose_at_sample_and_midpoint() {
        let a = RigidTransform::identity();
        let b = RigidTransform::from_translation(Vector3::new(2.0, 0.0, 0.0));
        let traj = Trajectory::new(vec![(0.0, a), (1.0, b)]).unwrap();
        assert_eq!(traj.pose_at(1.0).unwrap(), b);
        assert_eq!(traj.pose_at(0.0).unwrap(), a);
        let mid = traj.pose_at(0.5).unwrap();
        assert!((mid.translation() - Vector3::new(1.0, 0.0, 0.0)).norm() < 1e-15);
        assert!(matches!(traj.pose_at(1.5), Err(SubmapError::OutOfRange { .. })));
    }

    #[test]
    fn pose_at_rotation_midpoint() {
        let traj = Trajectory::new(vec![
            (0.0, RigidTransform::identity()),
            (2.0, RigidTransform::rotation_z(PI / 2.0)),
        ])
        .unwrap();
        let mid = traj.pose_at(1.0).unwrap();
        let expect = RigidTransform::rotation_z(PI / 4.0);
        assert!((mid.to_matrix() - expect.to_matrix()).amax() < 1e-9);
    }

    #[test]
    fn trajectory_rejects_non_increasing() {
        let p = RigidTransform::identity();
        assert!(Trajectory::new(vec![(0.0, p)]).is_err());
        assert!(Trajectory::new(vec![(0.0, p), (0.0, p)]).is_err());
    }

    #[test]
    fn identity_case_is_downsampled_concatenation() {
        let traj = Trajectory::new(vec![
            (0.0, RigidTransform::identity()),
            (10.0, RigidTransform::identity()),
        ])
        .unwrap();
        let lines = vec![
            ScanLine {
                timestamp: 1.0,
                points: vec![Vector3::new(0.01, 0.01, -3.0), Vector3::new(3.0, 0.0, -3.0)],
            },
            ScanLine {
                timestamp: 2.0,
                points: vec![Vector3::new(1.01, 1.01, -3.0)],
            },
        ];
        let spec = SubmapSpec::at(5.0);
        let out = build_submap(&lines, &traj, &SensorRig::default(), &spec).unwrap();
        let expect = voxel_downsample(
            &PointCloud::new(vec![Vector3::new(0.01, 0.01, -3.0), Vector3::new(1.01, 1.01, -3.0)]).unwrap(),
            spec.grid,
        );
        assert_eq!(out, expect);
    }

    #[test]
    fn line_at_anchor_time_is_unchanged() {
        let traj = straight_traj(1.0);
        let line = ScanLine {
            timestamp: 4.0,
            points: vec![Vector3::new(0.3, -0.7, -2.0)],
        };
        let spec = SubmapSpec {
            t_tau: 4.0,
            half_extent: 2.5,
            grid: 1e-6,
        };
        let out = register_lines(std::slice::from_ref(&line), &traj, &SensorRig::default(), &spec).unwrap();
        assert_eq!(out.points(), line.points.as_slice());
    }

    #[test]
    fn window_applies_to_horizontal_coordinates() {
        let traj = straight_traj(1.0);
        let lines: Vec<_> = (0..10)
            .map(|i| ScanLine {
                timestamp: i as f64,
                points: vec![Vector3::new(0.0, 0.0, -50.0), Vector3::new(0.0, 2.6, -1.0)],
            })
            .collect();
        let out = register_lines(&lines, &traj, &SensorRig::default(), &SubmapSpec::at(5.0)).unwrap();
        for p in out.points() {
            assert!(p.x.abs() <= 2.5 && p.y.abs() <= 2.5);
        }
        // depth is unbounded, and only lines within 2.5 m along x survive
        assert_eq!(out.len(), 5);
    }

    #[test]
    fn empty_submap_is_an_error() {
        let traj = straight_traj(1.0);
        let lines = vec![ScanLine {
            timestamp: 0.0,
            points: vec![Vector3::new(0.0, 0.0, -1.0)],
        }];
        assert_eq!(
            build_submap(&lines, &traj, &SensorRig::default(), &SubmapSpec::at(9.0)),
            Err(SubmapError::EmptySubmap)
        );
    }

    #[test]
    fn world_reframing_leaves_submap_unchanged() {
        let traj = Trajectory::new(
            (0..=10)
                .map(|i| {
                    let t = i as f64;
                    let pose = RigidTransform::rotation_z(0.05 * t)
                        .compose(&RigidTransform::from_translation(Vector3::new(0.5 * t, 0.1 * t, 0.0)));
                    (t, pose)
                })
                .collect(),
        )
        .unwrap();
        let lines: Vec<_> = (0..40)
            .map(|i| ScanLine {
                timestamp: i as f64 * 0.25,
                points: (0..20).map(|j| Vector3::new(0.0, -1.0 + 0.1 * j as f64, -3.0)).collect(),
            })
            .collect();
        let w = RigidTransform::exp(&crate::cloud::Twist::new(
            Vector3::new(0.1, -0.2, 0.7),
            Vector3::new(100.0, -40.0, 3.0),
        ));
        let spec = SubmapSpec {
            t_tau: 5.0,
            half_extent: 2.5,
            grid: 1e-3,
        };
        let a = register_lines(&lines, &traj, &SensorRig::default(), &spec).unwrap();
        let b = register_lines(&lines, &traj.reframed(&w), &SensorRig::default(), &spec).unwrap();
        assert_eq!(a.len(), b.len());
        for (p, q) in a.points().iter().zip(b.points()) {
            assert!((p - q).norm() < 1e-9);
        }
    }

    #[test]
    fn noise_is_deterministic_and_calibrated() {
        let cloud = PointCloud::new(vec![Vector3::zeros(); 100_000]).unwrap();
        assert_eq!(add_noise(&cloud, 0.0, 1), cloud);
        let a = add_noise(&cloud, 0.01, 42);
        assert_eq!(a, add_noise(&cloud, 0.01, 42));
        for axis in 0..3 {
            let n = a.len() as f64;
            let mean: f64 = a.points().iter().map(|p| p[axis]).sum::<f64>() / n;
            let var: f64 = a.points().iter().map(|p| (p[axis] - mean).powi(2)).sum::<f64>() / (n - 1.0);
            let std = var.sqrt();
            assert!((0.0097..=0.0103).contains(&std), "axis {axis}: {std}");
        }
    }
}
