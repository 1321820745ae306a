//! Geometry primitives shared by every stage of the pipeline.

mod kdtree;
mod normals;
pub mod ply;
mod transform;
mod voxel;

use std::sync::OnceLock;

use nalgebra::Vector3;
use thiserror::Error;

pub use kdtree::{Neighbour, SpatialIndex};
pub use normals::estimate_normals;
pub(crate) use normals::sorted_eigen;
pub use transform::{hat, so3_exp, so3_log, RigidTransform, TransformError, Twist};
pub use voxel::{voxel_downsample, VoxelKey};

pub type Point = Vector3<f64>;

/// Linear or sRGB triple in `[0, 1]`; which one is documented where it is used.
pub type Rgb = [f64; 3];

/// Invalid normals are stored as the zero vector so indices stay aligned with points.
pub const INVALID_NORMAL: Vector3<f64> = Vector3::new(0.0, 0.0, 0.0);

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CloudError {
    #[error("{what} has {got} entries but the cloud has {expected} points")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("non-finite coordinate at point {0}")]
    NonFinite(usize),
    #[error("normal {index} has norm {norm}, expected 1 (or 0 for an invalid normal)")]
    NotUnit { index: usize, norm: f64 },
    #[error("colour {0} outside [0, 1]")]
    ColourRange(usize),
}

/// Points with optional per-point normals and colours (sRGB, `[0, 1]`).
#[derive(Debug, Clone, Default)]
pub struct PointCloud {
    points: Vec<Point>,
    normals: Option<Vec<Vector3<f64>>>,
    colours: Option<Vec<Rgb>>,
    resolution: OnceLock<f64>,
}

impl PartialEq for PointCloud {
    fn eq(&self, other: &Self) -> bool {
        self.points == other.points && self.normals == other.normals && self.colours == other.colours
    }
}

impl PointCloud {
    pub fn new(points: Vec<Point>) -> Result<Self, CloudError> {
        if let Some(i) = points.iter().position(|p| !p.iter().all(|v| v.is_finite())) {
            return Err(CloudError::NonFinite(i));
        }
        Ok(Self {
            points,
            ..Default::default()
        })
    }

    pub fn with_normals(mut self, normals: Vec<Vector3<f64>>) -> Result<Self, CloudError> {
        if normals.len() != self.points.len() {
            return Err(CloudError::LengthMismatch {
                what: "normals",
                expected: self.points.len(),
                got: normals.len(),
            });
        }
        for (index, n) in normals.iter().enumerate() {
            let norm = n.norm();
            if !(norm == 0.0 || (norm - 1.0).abs() <= 1e-6) {
                return Err(CloudError::NotUnit { index, norm });
            }
        }
        self.normals = Some(normals);
        Ok(self)
    }

    pub fn with_colours(mut self, colours: Vec<Rgb>) -> Result<Self, CloudError> {
        if colours.len() != self.points.len() {
            return Err(CloudError::LengthMismatch {
                what: "colours",
                expected: self.points.len(),
                got: colours.len(),
            });
        }
        if let Some(i) = colours
            .iter()
            .position(|c| !c.iter().all(|v| (0.0..=1.0).contains(v)))
        {
            return Err(CloudError::ColourRange(i));
        }
        self.colours = Some(colours);
        Ok(self)
    }

    pub fn without_colours(mut self) -> Self {
        self.colours = None;
        self
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn normals(&self) -> Option<&[Vector3<f64>]> {
        self.normals.as_deref()
    }

    pub fn colours(&self) -> Option<&[Rgb]> {
        self.colours.as_deref()
    }

    pub fn has_normals(&self) -> bool {
        self.normals.is_some()
    }

    pub fn has_colours(&self) -> bool {
        self.colours.is_some()
    }

    pub fn normal_is_valid(&self, i: usize) -> bool {
        self.normals
            .as_ref()
            .is_some_and(|n| n[i].norm_squared() > 0.25)
    }

    /// Mean nearest-neighbour spacing, computed once.
    pub fn resolution(&self) -> f64 {
        *self.resolution.get_or_init(|| {
            if self.points.len() < 2 {
                return 0.0;
            }
            let index = SpatialIndex::new(&self.points);
            let total: f64 = self
                .points
                .iter()
                .map(|p| index.knn(p, 2).get(1).map_or(0.0, |n| n.distance()))
                .sum();
            total / self.points.len() as f64
        })
    }

    /// Seeds the resolution cache, e.g. to share one value across rotated copies.
    pub fn set_resolution(self, resolution: f64) -> Self {
        let cell = OnceLock::new();
        let _ = cell.set(resolution);
        Self {
            resolution: cell,
            ..self
        }
    }

    pub fn spatial_index(&self) -> SpatialIndex {
        SpatialIndex::new(&self.points)
    }

    /// Applies `t` to points and normals. The cached resolution carries over.
    pub fn transformed(&self, t: &RigidTransform) -> PointCloud {
        PointCloud {
            points: self.points.iter().map(|p| t.apply(p)).collect(),
            normals: self
                .normals
                .as_ref()
                .map(|ns| ns.iter().map(|n| t.apply_vector(n)).collect()),
            colours: self.colours.clone(),
            resolution: self.resolution.clone(),
        }
    }

    pub fn select(&self, indices: &[usize]) -> PointCloud {
        PointCloud {
            points: indices.iter().map(|&i| self.points[i]).collect(),
            normals: self
                .normals
                .as_ref()
                .map(|ns| indices.iter().map(|&i| ns[i]).collect()),
            colours: self
                .colours
                .as_ref()
                .map(|cs| indices.iter().map(|&i| cs[i]).collect()),
            resolution: OnceLock::new(),
        }
    }

    /// Concatenates clouds; normals/colours survive only if every part has them.
    pub fn concat(parts: &[PointCloud]) -> PointCloud {
        let points = parts.iter().flat_map(|c| c.points.iter().copied()).collect();
        let normals = parts
            .iter()
            .all(|c| c.normals.is_some())
            .then(|| parts.iter().flat_map(|c| c.normals.clone().unwrap()).collect());
        let colours = parts
            .iter()
            .all(|c| c.colours.is_some())
            .then(|| parts.iter().flat_map(|c| c.colours.clone().unwrap()).collect());
        PointCloud {
            points,
            normals,
            colours,
            resolution: OnceLock::new(),
        }
    }

    pub fn centroid(&self) -> Option<Point> {
        if self.points.is_empty() {
            return None;
        }
        let sum: Point = self.points.iter().sum();
        Some(sum / self.points.len() as f64)
    }

    pub(crate) fn from_parts_unchecked(
        points: Vec<Point>,
        normals: Option<Vec<Vector3<f64>>>,
        colours: Option<Vec<Rgb>>,
    ) -> Self {
        PointCloud {
            points,
            normals,
            colours,
            resolution: OnceLock::new(),
        }
    }
}

/// Rec. 709 luma of an RGB triple.
pub fn luma(c: &Rgb) -> f64 {
    0.2126 * c[0] + 0.7152 * c[1] + 0.0722 * c[2]
}

pub fn srgb_to_linear(c: f64) -> f64 {
    if c <= 0.04045 {
        c / 12.92
    } else {
        ((c + 0.055) / 1.055).powf(2.4)
    }
}

pub fn linear_to_srgb(c: f64) -> f64 {
    if c <= 0.0031308 {
        c * 12.92
    } else {
        1.055 * c.powf(1.0 / 2.4) - 0.055
    }
}
