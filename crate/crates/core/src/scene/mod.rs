//! Procedural seabed scenes with a simulated laser profiler and camera, and
//! loop-closure cases with exact ground truth.
//!
//! Scenes are height fields over the world `x, y` plane, `z` up: a random
//! seabed plus parametric objects, combined by taking the highest surface.

mod case;
mod primitives;
mod seabed;
mod sim;

use std::f64::consts::PI;

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cloud::Rgb;

pub use case::{
    load_case, make_loop_closure, save_case, standard_suite, CaseSpec, Crossing, LoopClosureCase, CATEGORY_COUNTS,
};
pub use primitives::Primitive;
pub use seabed::HeightGrid;
pub use sim::{render_image, simulate_scan, straight_pass, LaserParams};

#[derive(Debug, Error)]
pub enum SceneError {
    #[error("invalid scene: {0}")]
    BadSpec(&'static str),
    #[error("perturbation too large: {rotation_deg:.2} deg, {translation:.3} m")]
    PerturbationTooLarge { rotation_deg: f64, translation: f64 },
    #[error(transparent)]
    Submap(#[from] crate::submap::SubmapError),
    #[error(transparent)]
    Io(#[from] crate::submap::io::IoError),
    #[error(transparent)]
    Image(#[from] crate::colour::ImageLoadError),
    #[error("case file: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Category {
    Structured,
    SemiStructured,
    Unstructured,
}

impl Category {
    pub const ALL: [Category; 3] = [Category::Structured, Category::SemiStructured, Category::Unstructured];

    pub fn name(self) -> &'static str {
        match self {
            Category::Structured => "structured",
            Category::SemiStructured => "semi-structured",
            Category::Unstructured => "unstructured",
        }
    }

    /// RMS seabed height used when the spec leaves it unset.
    pub fn default_roughness(self) -> f64 {
        match self {
            Category::Structured => 0.05,
            Category::SemiStructured => 0.08,
            Category::Unstructured => 0.15,
        }
    }
}

/// Man-made object of a structured scene.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Structure {
    Pipe,
    Wreck,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SceneSpec {
    pub category: Category,
    /// Side of the square scene, metres.
    pub extent: f64,
    /// Laser samples per square metre at the nominal altitude.
    pub resolution: f64,
    pub seed: u64,
    pub structure: Structure,
    pub pipe_radius: f64,
    pub pipe_length: f64,
    /// Hull length, beam and height.
    pub wreck_size: [f64; 3],
    pub debris_count: usize,
    /// RMS height, metres; the category default when unset.
    pub roughness_amplitude: Option<f64>,
    /// Power-spectrum exponent.
    pub roughness_exponent: f64,
}

impl Default for SceneSpec {
    fn default() -> Self {
        Self {
            category: Category::Unstructured,
            extent: 12.0,
            resolution: 1000.0,
            seed: 0,
            structure: Structure::Pipe,
            pipe_radius: 0.3,
            pipe_length: 4.0,
            wreck_size: [3.0, 1.2, 0.6],
            debris_count: 8,
            roughness_amplitude: None,
            roughness_exponent: -2.0,
        }
    }
}

impl SceneSpec {
    pub fn new(category: Category, seed: u64) -> Self {
        Self {
            category,
            seed,
            ..Default::default()
        }
    }

    pub fn roughness(&self) -> f64 {
        self.roughness_amplitude.unwrap_or(self.category.default_roughness())
    }

    pub fn validate(&self) -> Result<(), SceneError> {
        let positive = |v: f64| v > 0.0 && v.is_finite();
        if !positive(self.extent) || !positive(self.resolution) {
            return Err(SceneError::BadSpec("extent and resolution must be positive"));
        }
        if !(self.roughness() >= 0.0) || !self.roughness_exponent.is_finite() {
            return Err(SceneError::BadSpec("roughness must be non-negative"));
        }
        if self.category == Category::Structured {
            let ok = match self.structure {
                Structure::Pipe => positive(self.pipe_radius) && positive(self.pipe_length),
                Structure::Wreck => self.wreck_size.iter().all(|&v| positive(v)),
            };
            if !ok {
                return Err(SceneError::BadSpec("structure dimensions must be positive"));
            }
        }
        Ok(())
    }
}

/// Seabed grid spacing, metres.
const SEABED_CELL: f64 = 0.02;
/// Path-length step of the ray march, metres.
const MARCH_STEP: f64 = 0.01;

#[derive(Debug, Clone)]
pub struct Scene {
    pub spec: SceneSpec,
    seabed: HeightGrid,
    primitives: Vec<Primitive>,
    half_span: f64,
    z_range: (f64, f64),
}

pub fn generate_scene(spec: &SceneSpec) -> Result<Scene, SceneError> {
    spec.validate()?;
    let half_span = spec.extent / 2.0 + 1.0;
    let seabed = HeightGrid::spectral(
        half_span,
        SEABED_CELL,
        spec.roughness(),
        spec.roughness_exponent,
        spec.seed ^ 0x5eab_ed00,
    );
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut primitives = Vec::new();
    match spec.category {
        Category::Structured => {
            let centre = [rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5)];
            let heading = rng.gen_range(0.0..PI);
            let ground = seabed.height(centre[0], centre[1]);
            match spec.structure {
                Structure::Pipe => primitives.push(Primitive::Pipe {
                    centre,
                    heading,
                    length: spec.pipe_length,
                    radius: spec.pipe_radius,
                    axis_z: ground,
                }),
                Structure::Wreck => {
                    let [l, w, h] = spec.wreck_size;
                    let base_z = ground - 0.1;
                    primitives.push(Primitive::Block {
                        centre,
                        heading,
                        size: spec.wreck_size,
                        base_z,
                    });
                    let (s, c) = heading.sin_cos();
                    primitives.push(Primitive::Block {
                        centre: [centre[0] + 0.2 * l * c, centre[1] + 0.2 * l * s],
                        heading,
                        size: [0.3 * l, 0.6 * w, 0.5 * h],
                        base_z: base_z + h,
                    });
                }
            }
        }
        Category::SemiStructured => {
            for k in 0..spec.debris_count {
                let centre = [rng.gen_range(-2.5..2.5), rng.gen_range(-2.5..2.5)];
                let ground = seabed.height(centre[0], centre[1]);
                if k % 2 == 0 {
                    primitives.push(Primitive::Block {
                        centre,
                        heading: rng.gen_range(0.0..PI),
                        size: [rng.gen_range(0.25..0.7), rng.gen_range(0.2..0.5), rng.gen_range(0.1..0.35)],
                        base_z: ground - 0.05,
                    });
                } else {
                    let radius = rng.gen_range(0.15..0.4);
                    primitives.push(Primitive::Dome {
                        centre,
                        radius,
                        base_z: ground - 0.3 * radius,
                    });
                }
            }
        }
        Category::Unstructured => {}
    }
    let (lo, hi) = seabed.min_max();
    let top = primitives.iter().map(Primitive::top).fold(hi, f64::max);
    Ok(Scene {
        spec: spec.clone(),
        seabed,
        primitives,
        half_span,
        z_range: (lo, top),
    })
}

fn hash01(seed: u64, i: i64, j: i64) -> f64 {
    let mut z = seed ^ (i as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15) ^ (j as u64).wrapping_mul(0xc2b2_ae3d_27d4_eb4f);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^= z >> 31;
    (z >> 11) as f64 / (1u64 << 53) as f64
}

impl Scene {
    pub fn primitives(&self) -> &[Primitive] {
        &self.primitives
    }

    pub fn seabed_height(&self, x: f64, y: f64) -> f64 {
        self.seabed.height(x, y)
    }

    /// Top surface height and the primitive that forms it, if any.
    pub fn surface(&self, x: f64, y: f64) -> (f64, Option<usize>) {
        let mut best = (self.seabed.height(x, y), None);
        for (k, p) in self.primitives.iter().enumerate() {
            if let Some(h) = p.height(x, y) {
                if h > best.0 {
                    best = (h, Some(k));
                }
            }
        }
        best
    }

    pub fn height(&self, x: f64, y: f64) -> f64 {
        self.surface(x, y).0
    }

    /// Lowest and highest surface heights.
    pub fn z_range(&self) -> (f64, f64) {
        self.z_range
    }

    pub fn half_span(&self) -> f64 {
        self.half_span
    }

    /// sRGB albedo at the surface above `(p.x, p.y)`: a 0.5 m checker with
    /// 0.1 m cell noise on the seabed, flat tints with the same noise on
    /// objects.
    pub fn colour(&self, p: &Vector3<f64>) -> Rgb {
        let noise = hash01(self.spec.seed, (p.x * 10.0).floor() as i64, (p.y * 10.0).floor() as i64) - 0.5;
        let base = match self.surface(p.x, p.y).1 {
            Some(k) => self.primitives[k].albedo(),
            None => {
                let light = ((p.x * 2.0).floor() + (p.y * 2.0).floor()).rem_euclid(2.0) == 0.0;
                let f = if light { 1.0 } else { 0.55 };
                [0.78 * f, 0.72 * f, 0.55 * f]
            }
        };
        base.map(|c| (c + 0.16 * noise).clamp(0.0, 1.0))
    }

    /// Distance along the unit direction `dir` from `origin` to the first
    /// surface crossing, or `None` if the ray leaves the scene first.
    pub fn raycast(&self, origin: &Vector3<f64>, dir: &Vector3<f64>) -> Option<f64> {
        let z_hi = self.z_range.1 + 1e-6;
        let f = |s: f64| {
            let p = origin + dir * s;
            p.z - self.height(p.x, p.y)
        };
        let mut s = 0.0;
        if origin.z > z_hi {
            if dir.z >= 0.0 {
                return None;
            }
            s = (origin.z - z_hi) / -dir.z;
        }
        if f(s) <= 0.0 {
            return Some(s);
        }
        loop {
            let next = s + MARCH_STEP;
            let p = origin + dir * next;
            if p.x.abs() > self.half_span || p.y.abs() > self.half_span {
                return None;
            }
            if f(next) <= 0.0 {
                let (mut lo, mut hi) = (s, next);
                while hi - lo > 1e-13 {
                    let mid = 0.5 * (lo + hi);
                    if mid <= lo || mid >= hi {
                        break;
                    }
                    if f(mid) > 0.0 {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                return Some(0.5 * (lo + hi));
            }
            if p.z > z_hi && dir.z >= 0.0 {
                return None;
            }
            s = next;
        }
    }
}
