//! Local 3D descriptors: PFH, PFHRGB, SHOT, CSHOT, 3DSC and USC.
//!
//! A [`DescriptorSet`] holds one row per keypoint. Keypoints whose support
//! is empty (or whose reference frame is undefined) get an all-zero row and
//! are flagged in [`DescriptorSet::empty`], so rows stay aligned with the
//! keypoint list.

mod frame;
mod io;
mod pfh;
mod shape_context;
mod shot;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cloud::{PointCloud, SpatialIndex};
use crate::keypoints::{KeypointSet, Radius};

pub use frame::local_reference_frame;
pub use io::{read_descriptors, write_descriptors, write_descriptors_csv};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DescribeError {
    #[error("{0} needs per-point normals")]
    MissingNormals(DescriptorKind),
    #[error("{0} needs per-point colours")]
    MissingColours(DescriptorKind),
    #[error("descriptor dimensions differ: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("invalid descriptor parameters: {0}")]
    BadParams(&'static str),
    #[error("unknown descriptor '{0}'")]
    UnknownDescriptor(String),
    #[error("keypoint index {0} out of range")]
    BadKeypoint(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DescriptorKind {
    Pfh,
    Pfhrgb,
    Shot,
    Cshot,
    #[serde(rename = "3dsc")]
    Sc3d,
    Usc,
}

impl DescriptorKind {
    pub const ALL: [DescriptorKind; 6] = [
        DescriptorKind::Pfh,
        DescriptorKind::Pfhrgb,
        DescriptorKind::Shot,
        DescriptorKind::Cshot,
        DescriptorKind::Sc3d,
        DescriptorKind::Usc,
    ];

    pub fn dim(self) -> usize {
        match self {
            DescriptorKind::Pfh => pfh::PFH_DIM,
            DescriptorKind::Pfhrgb => 2 * pfh::PFH_DIM,
            DescriptorKind::Shot => shot::SHOT_DIM,
            DescriptorKind::Cshot => shot::SHOT_DIM + shot::COLOUR_DIM,
            DescriptorKind::Sc3d => shape_context::SC3D_DIM,
            DescriptorKind::Usc => shape_context::USC_DIM,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            DescriptorKind::Pfh => "pfh",
            DescriptorKind::Pfhrgb => "pfhrgb",
            DescriptorKind::Shot => "shot",
            DescriptorKind::Cshot => "cshot",
            DescriptorKind::Sc3d => "3dsc",
            DescriptorKind::Usc => "usc",
        }
    }

    pub fn needs_colours(self) -> bool {
        matches!(self, DescriptorKind::Pfhrgb | DescriptorKind::Cshot)
    }

    fn code(self) -> u8 {
        DescriptorKind::ALL.iter().position(|&k| k == self).unwrap() as u8
    }

    fn from_code(code: u8) -> Option<Self> {
        DescriptorKind::ALL.get(code as usize).copied()
    }
}

impl fmt::Display for DescriptorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DescriptorKind {
    type Err = DescribeError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let lower = s.to_ascii_lowercase();
        DescriptorKind::ALL
            .into_iter()
            .find(|k| k.name() == lower || (lower == "sc3d" && *k == DescriptorKind::Sc3d))
            .ok_or(DescribeError::UnknownDescriptor(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DescriptorParams {
    pub support_radius: Radius,
    /// SHOT/CSHOT/USC reference-frame radius.
    pub lrf_radius: Radius,
    /// 3DSC/USC innermost radial bin edge.
    pub min_radius: Radius,
    /// 3DSC/USC local density radius for the bin weights.
    pub density_radius: Radius,
    /// PFH/PFHRGB use at most this many nearest support points.
    pub pfh_max_neighbours: usize,
    /// Seed for the 3DSC azimuth origin.
    pub seed: u64,
    /// Supports with fewer points (keypoint included) give an empty row.
    pub min_support: usize,
}

impl Default for DescriptorParams {
    fn default() -> Self {
        Self {
            support_radius: Radius::Resolutions(20.0),
            lrf_radius: Radius::Resolutions(20.0),
            min_radius: Radius::Resolutions(2.0),
            density_radius: Radius::Resolutions(4.0),
            pfh_max_neighbours: 128,
            seed: 0x5eed,
            min_support: 5,
        }
    }
}

/// Radii in metres after resolving against a cloud resolution.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Resolved {
    pub support: f64,
    pub lrf: f64,
    pub min: f64,
    pub density: f64,
}

impl DescriptorParams {
    fn resolve(&self, res: f64) -> Result<Resolved, DescribeError> {
        let r = Resolved {
            support: self.support_radius.resolve(res),
            lrf: self.lrf_radius.resolve(res),
            min: self.min_radius.resolve(res),
            density: self.density_radius.resolve(res),
        };
        if !(r.support > 0.0 && r.lrf > 0.0 && r.min > 0.0 && r.density > 0.0) || ![r.support, r.lrf, r.min, r.density].iter().all(|v| v.is_finite()) {
            return Err(DescribeError::BadParams("radii must be positive and finite"));
        }
        if r.min >= r.support {
            return Err(DescribeError::BadParams("minimal radius must be below the support radius"));
        }
        if self.pfh_max_neighbours < 2 {
            return Err(DescribeError::BadParams("pfh needs at least two neighbours"));
        }
        Ok(r)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DescriptorSet {
    pub kind: DescriptorKind,
    /// Indices into the described cloud, one per row.
    pub keypoints: Vec<usize>,
    /// Row-major, `keypoints.len() × kind.dim()`.
    pub data: Vec<f64>,
    pub empty: Vec<bool>,
}

impl DescriptorSet {
    pub fn new(kind: DescriptorKind, keypoints: Vec<usize>, data: Vec<f64>, empty: Vec<bool>) -> Result<Self, DescribeError> {
        if data.len() != keypoints.len() * kind.dim() {
            return Err(DescribeError::DimensionMismatch(data.len(), keypoints.len() * kind.dim()));
        }
        if empty.len() != keypoints.len() {
            return Err(DescribeError::DimensionMismatch(empty.len(), keypoints.len()));
        }
        Ok(Self {
            kind,
            keypoints,
            data,
            empty,
        })
    }

    pub fn dim(&self) -> usize {
        self.kind.dim()
    }

    pub fn len(&self) -> usize {
        self.keypoints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keypoints.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let d = self.dim();
        &self.data[i * d..(i + 1) * d]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.dim())
    }
}

/// Euclidean distance between two descriptor rows.
pub fn descriptor_distance(a: &[f64], b: &[f64]) -> Result<f64, DescribeError> {
    if a.len() != b.len() {
        return Err(DescribeError::DimensionMismatch(a.len(), b.len()));
    }
    Ok(a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt())
}

/// Shared per-cloud state for one `describe` call.
pub(crate) struct Context<'a> {
    pub cloud: &'a PointCloud,
    pub index: SpatialIndex,
    pub radii: Resolved,
    pub params: &'a DescriptorParams,
}

pub fn describe(
    kind: DescriptorKind,
    cloud: &PointCloud,
    keypoints: &KeypointSet,
    params: &DescriptorParams,
) -> Result<DescriptorSet, DescribeError> {
    describe_indices(kind, cloud, &keypoints.indices, params)
}

/// As [`describe`] for an explicit list of cloud indices.
pub fn describe_indices(
    kind: DescriptorKind,
    cloud: &PointCloud,
    indices: &[usize],
    params: &DescriptorParams,
) -> Result<DescriptorSet, DescribeError> {
    if !cloud.has_normals() {
        return Err(DescribeError::MissingNormals(kind));
    }
    if kind.needs_colours() && !cloud.has_colours() {
        return Err(DescribeError::MissingColours(kind));
    }
    if let Some(&bad) = indices.iter().find(|&&i| i >= cloud.len()) {
        return Err(DescribeError::BadKeypoint(bad));
    }
    let ctx = Context {
        cloud,
        index: cloud.spatial_index(),
        radii: params.resolve(cloud.resolution())?,
        params,
    };
    let dim = kind.dim();
    let mut data = vec![0.0; indices.len() * dim];
    let mut empty = vec![false; indices.len()];
    let density = matches!(kind, DescriptorKind::Sc3d | DescriptorKind::Usc).then(|| shape_context::point_density(&ctx));
    for (row, (&kp, out)) in indices.iter().zip(data.chunks_exact_mut(dim)).enumerate() {
        let filled = match kind {
            DescriptorKind::Pfh => pfh::pfh(&ctx, kp, out, false),
            DescriptorKind::Pfhrgb => pfh::pfh(&ctx, kp, out, true),
            DescriptorKind::Shot => shot::shot(&ctx, kp, out, false),
            DescriptorKind::Cshot => shot::shot(&ctx, kp, out, true),
            DescriptorKind::Sc3d => shape_context::sc3d(&ctx, kp, density.as_deref().unwrap(), out),
            DescriptorKind::Usc => shape_context::usc(&ctx, kp, density.as_deref().unwrap(), out),
        };
        if !filled {
            out.fill(0.0);
            empty[row] = true;
        }
    }
    DescriptorSet::new(kind, indices.to_vec(), data, empty)
}
