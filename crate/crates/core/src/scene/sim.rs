//! Sensor forward models: laser profiler lines and pinhole camera images.

use std::f64::consts::PI;

use image::{Rgb as Pixel, RgbImage};
use nalgebra::{Rotation3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::Scene;
use crate::cloud::RigidTransform;
use crate::colour::CameraModel;
use crate::submap::{ScanLine, SensorRig, Trajectory};

/// A planar fan of rays in the laser's `y, z` plane, centred on `-z`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LaserParams {
    pub fan_half_angle_deg: f64,
    pub rays: usize,
    /// Lines per second.
    pub line_rate: f64,
    /// Standard deviation of the range noise, metres.
    pub range_noise: f64,
    pub max_range: f64,
}

impl Default for LaserParams {
    fn default() -> Self {
        Self {
            fan_half_angle_deg: 45.0,
            rays: 301,
            line_rate: 10.0,
            range_noise: 0.0,
            max_range: 20.0,
        }
    }
}

impl LaserParams {
    /// Unit ray directions in the laser frame.
    pub fn directions(&self) -> Vec<Vector3<f64>> {
        let half = self.fan_half_angle_deg.to_radians();
        (0..self.rays)
            .map(|i| {
                let a = if self.rays == 1 {
                    0.0
                } else {
                    -half + 2.0 * half * i as f64 / (self.rays - 1) as f64
                };
                Vector3::new(0.0, a.sin(), -a.cos())
            })
            .collect()
    }
}

/// Casts one fan per line time over the trajectory span. Points are in the
/// laser frame; rays that miss or exceed `max_range` are dropped.
pub fn simulate_scan(scene: &Scene, traj: &Trajectory, rig: &SensorRig, laser: &LaserParams, seed: u64) -> Vec<ScanLine> {
    let dirs = laser.directions();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = (laser.range_noise > 0.0).then(|| Normal::new(0.0, laser.range_noise).expect("finite noise"));
    let mut lines = Vec::new();
    let mut k = 0u64;
    loop {
        let t = traj.start() + k as f64 / laser.line_rate;
        if t > traj.end() {
            break;
        }
        k += 1;
        let world_from_laser = traj.pose_at(t).expect("inside span").compose(&rig.laser);
        let origin = *world_from_laser.translation();
        let mut points = Vec::with_capacity(dirs.len());
        for d in &dirs {
            let Some(mut range) = scene.raycast(&origin, &world_from_laser.apply_vector(d)) else {
                continue;
            };
            if range > laser.max_range {
                continue;
            }
            if let Some(n) = &noise {
                range += n.sample(&mut rng);
            }
            points.push(d * range);
        }
        lines.push(ScanLine { timestamp: t, points });
    }
    lines
}

/// Renders the scene albedo through a pinhole camera; pixels whose ray misses
/// the scene are black.
pub fn render_image(scene: &Scene, cam: &CameraModel, world_from_camera: &RigidTransform) -> RgbImage {
    let origin = *world_from_camera.translation();
    RgbImage::from_fn(cam.width, cam.height, |u, v| {
        let ray = cam.unproject(&[u as f64 + 0.5, v as f64 + 0.5], 1.0).normalize();
        let dir = world_from_camera.apply_vector(&ray);
        match scene.raycast(&origin, &dir) {
            Some(s) => {
                let c = scene.colour(&(origin + dir * s));
                Pixel(c.map(|x| (x * 255.0).round() as u8))
            }
            None => Pixel([0, 0, 0]),
        }
    })
}

/// Straight constant-speed pass through `centre` at `altitude` above the
/// datum, with slow sinusoidal roll, pitch and heave of amplitude
/// `wobble_deg` (heave 0.05 m). Sampled at 20 Hz from `t = 0`; the vehicle
/// is over `centre` at the mid time.
pub fn straight_pass(centre: [f64; 2], heading: f64, length: f64, altitude: f64, speed: f64, wobble_deg: f64, seed: u64) -> Trajectory {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let phases: [f64; 3] = [rng.gen_range(0.0..2.0 * PI), rng.gen_range(0.0..2.0 * PI), rng.gen_range(0.0..2.0 * PI)];
    let duration = length / speed;
    let n = (duration * 20.0).ceil() as usize;
    let (s, c) = heading.sin_cos();
    let amp = wobble_deg.to_radians();
    let samples = (0..=n)
        .map(|i| {
            let t = duration * i as f64 / n as f64;
            let along = speed * t - length / 2.0;
            let roll = amp * (2.0 * PI * t / 7.0 + phases[0]).sin();
            let pitch = amp * (2.0 * PI * t / 5.0 + phases[1]).sin();
            let heave = 0.05 * (2.0 * PI * t / 9.0 + phases[2]).sin();
            let r = Rotation3::from_euler_angles(roll, pitch, heading).into_inner();
            let p = Vector3::new(centre[0] + along * c, centre[1] + along * s, altitude + heave);
            (t, RigidTransform::from_approximate(r, p))
        })
        .collect();
    Trajectory::new(samples).expect("increasing sample times")
}
