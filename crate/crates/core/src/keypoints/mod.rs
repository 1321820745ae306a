//! 3D keypoint detectors and the repeatability protocol.
//!
//! Every detector computes a per-point saliency over a spherical support,
//! drops points under a threshold and then runs greedy non-maximum
//! suppression over a deterministic global ordering.

mod response;
mod sift;
mod sweep;

use std::collections::BTreeMap;
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cloud::{Point, PointCloud, SpatialIndex};

pub use sweep::{
    noise_sweep, repeatability, rotation_sweep, RepeatabilityReport, SweepVariable, NOISE_LEVELS, ROTATION_ANGLES_DEG,
    SWEEP_EPSILON,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DetectError {
    #[error("{0} needs per-point normals")]
    MissingNormals(DetectorKind),
    #[error("cloud has {0} points, at least 10 are needed")]
    TooFewPoints(usize),
    #[error("keypoint set is empty")]
    EmptyKeypointSet,
    #[error("unknown detector '{0}'")]
    UnknownDetector(String),
    #[error("invalid detector parameters: {0}")]
    BadParams(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DetectorKind {
    Iss,
    Harris3d,
    Lowe,
    Tomasi,
    Curvature,
    Harris6d,
    Sift3d,
    Susan,
}

impl DetectorKind {
    pub const ALL: [DetectorKind; 8] = [
        DetectorKind::Iss,
        DetectorKind::Harris3d,
        DetectorKind::Lowe,
        DetectorKind::Tomasi,
        DetectorKind::Curvature,
        DetectorKind::Harris6d,
        DetectorKind::Sift3d,
        DetectorKind::Susan,
    ];

    pub fn name(self) -> &'static str {
        match self {
            DetectorKind::Iss => "iss",
            DetectorKind::Harris3d => "harris3d",
            DetectorKind::Lowe => "lowe",
            DetectorKind::Tomasi => "tomasi",
            DetectorKind::Curvature => "curvature",
            DetectorKind::Harris6d => "harris6d",
            DetectorKind::Sift3d => "sift3d",
            DetectorKind::Susan => "susan",
        }
    }

    pub fn needs_normals(self) -> bool {
        !matches!(self, DetectorKind::Iss | DetectorKind::Sift3d)
    }
}

impl fmt::Display for DetectorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DetectorKind {
    type Err = DetectError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let lower = s.to_ascii_lowercase();
        DetectorKind::ALL
            .into_iter()
            .find(|k| k.name() == lower)
            .or(match lower.as_str() {
                "harris" => Some(DetectorKind::Harris3d),
                "sift" => Some(DetectorKind::Sift3d),
                "susan3d" => Some(DetectorKind::Susan),
                _ => None,
            })
            .ok_or(DetectError::UnknownDetector(s.to_string()))
    }
}

/// A length either in metres or as a multiple of the cloud resolution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Radius {
    Metres(f64),
    Resolutions(f64),
}

impl Radius {
    pub fn resolve(self, resolution: f64) -> f64 {
        match self {
            Radius::Metres(m) => m,
            Radius::Resolutions(k) => k * resolution,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DetectorParams {
    /// Neighbourhood over which saliency is computed.
    pub support_radius: Radius,
    pub nms_radius: Radius,
    /// Used when a sweep has to re-estimate normals.
    pub normal_radius: Radius,
    /// Neighbourhood size (query included) below which a point is skipped.
    pub min_neighbours: usize,
    /// Saliency must exceed this fraction of the cloud maximum.
    pub relative_threshold: f64,
    pub iss_gamma21: f64,
    pub iss_gamma32: f64,
    pub harris_k: f64,
    pub sift_min_scale: Radius,
    pub sift_octaves: usize,
    pub sift_scales: usize,
    pub sift_min_contrast: f64,
    /// Minimum nucleus-to-USAN-centroid distance, metres.
    pub susan_distance: f64,
    /// Neighbour j joins the USAN when `1 - n·n_j` is at most this.
    pub susan_angular: f64,
}

impl Default for DetectorParams {
    fn default() -> Self {
        Self {
            support_radius: Radius::Resolutions(6.0),
            nms_radius: Radius::Resolutions(4.0),
            normal_radius: Radius::Resolutions(4.0),
            min_neighbours: 5,
            relative_threshold: 0.01,
            iss_gamma21: 0.975,
            iss_gamma32: 0.975,
            harris_k: 0.04,
            sift_min_scale: Radius::Resolutions(2.0),
            sift_octaves: 3,
            sift_scales: 4,
            sift_min_contrast: 0.0,
            susan_distance: 1e-3,
            susan_angular: 78f64.to_radians().cos(),
        }
    }
}

impl DetectorParams {
    pub fn validate(&self) -> Result<(), DetectError> {
        let r = |x: Radius| match x {
            Radius::Metres(v) | Radius::Resolutions(v) => v > 0.0 && v.is_finite(),
        };
        if !(r(self.support_radius) && r(self.nms_radius) && r(self.normal_radius) && r(self.sift_min_scale)) {
            return Err(DetectError::BadParams("radii must be positive"));
        }
        let finite = [
            self.relative_threshold,
            self.iss_gamma21,
            self.iss_gamma32,
            self.harris_k,
            self.sift_min_contrast,
            self.susan_distance,
            self.susan_angular,
        ];
        if finite.iter().any(|v| !v.is_finite()) {
            return Err(DetectError::BadParams("thresholds must be finite"));
        }
        if self.sift_octaves == 0 || self.sift_scales == 0 {
            return Err(DetectError::BadParams("sift needs at least one octave and scale"));
        }
        Ok(())
    }
}

/// Per-detector parameters, as read from `detectors.toml`. Kinds without a
/// table use [`DetectorParams::default`].
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DetectorConfig {
    #[serde(flatten)]
    pub kinds: BTreeMap<DetectorKind, DetectorParams>,
}

impl DetectorConfig {
    pub fn params(&self, kind: DetectorKind) -> DetectorParams {
        self.kinds.get(&kind).copied().unwrap_or_default()
    }

    pub fn from_toml(text: &str) -> Result<Self, toml::de::Error> {
        toml::from_str(text)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KeypointSet {
    pub kind: DetectorKind,
    /// Ascending, unique indices into the source cloud.
    pub indices: Vec<usize>,
    pub points: Vec<Point>,
    pub saliency: Vec<f64>,
    pub elapsed_ms: f64,
}

impl KeypointSet {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    /// Writes `index,x,y,z,saliency` rows.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<(), csv::Error> {
        let mut wtr = csv::Writer::from_writer(writer);
        for ((&index, p), &saliency) in self.indices.iter().zip(&self.points).zip(&self.saliency) {
            wtr.serialize(KeypointRow {
                index,
                x: p.x,
                y: p.y,
                z: p.z,
                saliency,
            })?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R, kind: DetectorKind) -> Result<Self, csv::Error> {
        let mut out = KeypointSet {
            kind,
            indices: Vec::new(),
            points: Vec::new(),
            saliency: Vec::new(),
            elapsed_ms: 0.0,
        };
        for row in csv::Reader::from_reader(reader).deserialize() {
            let row: KeypointRow = row?;
            out.indices.push(row.index);
            out.points.push(Point::new(row.x, row.y, row.z));
            out.saliency.push(row.saliency);
        }
        Ok(out)
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct KeypointRow {
    index: usize,
    x: f64,
    y: f64,
    z: f64,
    saliency: f64,
}

/// Runs one detector. The result does not depend on anything but the cloud
/// contents, its resolution and `params`.
pub fn detect(kind: DetectorKind, cloud: &PointCloud, params: &DetectorParams) -> Result<KeypointSet, DetectError> {
    params.validate()?;
    if cloud.len() < 10 {
        return Err(DetectError::TooFewPoints(cloud.len()));
    }
    if kind.needs_normals() && !cloud.has_normals() {
        return Err(DetectError::MissingNormals(kind));
    }
    let start = Instant::now();
    let res = cloud.resolution();
    let index = cloud.spatial_index();
    let saliency = match kind {
        DetectorKind::Sift3d => sift::sift_saliency(cloud, params, res),
        _ => {
            let radius = params.support_radius.resolve(res);
            let raw = response::saliency(kind, cloud, &index, radius, params, res);
            apply_relative_threshold(raw, params.relative_threshold)
        }
    };
    let keep = non_max_suppression(&index, &saliency, params.nms_radius.resolve(res));
    let elapsed_ms = start.elapsed().as_secs_f64() * 1e3;
    Ok(KeypointSet {
        kind,
        points: keep.iter().map(|&i| cloud.points()[i]).collect(),
        saliency: keep.iter().map(|&i| saliency[i].unwrap()).collect(),
        indices: keep,
        elapsed_ms,
    })
}

fn apply_relative_threshold(raw: Vec<Option<f64>>, rel: f64) -> Vec<Option<f64>> {
    let max = raw.iter().flatten().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(max > 0.0) {
        return vec![None; raw.len()];
    }
    let floor = rel * max;
    raw.into_iter().map(|s| s.filter(|&v| v > 0.0 && v > floor)).collect()
}

/// Greedy suppression in descending saliency order; saliency is compared
/// after rounding to 1e-9 of the maximum so that values differing only by
/// floating-point noise tie and fall back to index order.
pub fn non_max_suppression(index: &SpatialIndex, saliency: &[Option<f64>], radius: f64) -> Vec<usize> {
    let max = saliency.iter().flatten().map(|v| v.abs()).fold(0.0, f64::max);
    if max == 0.0 {
        return Vec::new();
    }
    let mut order: Vec<(i64, usize)> = saliency
        .iter()
        .enumerate()
        .filter_map(|(i, s)| s.map(|v| (((v / max) * 1e9).round() as i64, i)))
        .collect();
    order.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
    let mut suppressed = vec![false; saliency.len()];
    let mut keep = Vec::new();
    let mut buf = Vec::new();
    let points = index.points();
    for (_, i) in order {
        if suppressed[i] {
            continue;
        }
        keep.push(i);
        index.radius_into(&points[i], radius, &mut buf);
        for nb in &buf {
            suppressed[nb.index] = true;
        }
    }
    keep.sort_unstable();
    keep
}
