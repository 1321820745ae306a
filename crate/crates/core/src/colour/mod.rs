//! Point cloud colourization from posed camera images.
//!
//! For every image the cloud is moved into the camera frame, occluded points
//! are removed with the spherical-flip visibility operator, the survivors are
//! projected through the pinhole model and each projected pixel becomes a
//! colour candidate weighted by a 2D Gaussian centred on the principal point.
//! Candidates are fused per point as a weighted mean in linear RGB.

mod hull;

use std::path::Path;

use image::RgbImage;
use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cloud::{linear_to_srgb, srgb_to_linear, Point, PointCloud, RigidTransform, Rgb};
use crate::submap::SensorRig;

pub use hull::hull_vertices;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ColourError {
    #[error("no colour candidates with positive weight")]
    NoCandidates,
    #[error("visibility hull is degenerate (points do not span 3D)")]
    DegenerateHull,
    #[error("camera point coincides with cloud point {0}")]
    CameraOnPoint(usize),
    #[error("invalid camera model: {0}")]
    BadCamera(&'static str),
    #[error("image is {got:?} but the camera model is {expected:?}")]
    ImageSize { expected: (u32, u32), got: (u32, u32) },
}

#[derive(Debug, Error)]
pub enum ImageLoadError {
    #[error(transparent)]
    Image(#[from] image::ImageError),
    #[error(transparent)]
    Sidecar(#[from] crate::submap::io::IoError),
    #[error("pose sidecar has no rows")]
    EmptySidecar,
}

/// Pinhole intrinsics with zero skew.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraModel {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
}

impl CameraModel {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64, width: u32, height: u32) -> Result<Self, ColourError> {
        if !(fx > 0.0 && fy > 0.0) {
            return Err(ColourError::BadCamera("focal lengths must be positive"));
        }
        if !(cx >= 0.0 && cx < width as f64 && cy >= 0.0 && cy < height as f64) {
            return Err(ColourError::BadCamera("principal point outside the raster"));
        }
        Ok(Self {
            fx,
            fy,
            cx,
            cy,
            width,
            height,
        })
    }

    /// `K p` dehomogenized, without the raster bounds check. `None` when `w <= 0`.
    pub fn project_unbounded(&self, p: &Vector3<f64>) -> Option<[f64; 2]> {
        let w = p.z;
        if !(w > 0.0) {
            return None;
        }
        Some([(self.fx * p.x + self.cx * w) / w, (self.fy * p.y + self.cy * w) / w])
    }

    /// Pixel of a camera-frame point, or `None` (out of view) when behind the
    /// camera or outside the raster.
    pub fn project(&self, p: &Vector3<f64>) -> Option<[f64; 2]> {
        self.project_unbounded(p).filter(|px| self.contains(px))
    }

    pub fn contains(&self, px: &[f64; 2]) -> bool {
        px[0] >= 0.0 && px[0] < self.width as f64 && px[1] >= 0.0 && px[1] < self.height as f64
    }

    /// Camera-frame point at depth `w` along the ray through `px`.
    pub fn unproject(&self, px: &[f64; 2], w: f64) -> Vector3<f64> {
        Vector3::new((px[0] - self.cx) * w / self.fx, (px[1] - self.cy) * w / self.fy, w)
    }

    /// Gaussian weight peaking at the principal point, `σ_u = sigma_frac · width`,
    /// `σ_v = sigma_frac · height`.
    pub fn gaussian_weight(&self, px: &[f64; 2], sigma_frac: f64) -> f64 {
        let su = sigma_frac * self.width as f64;
        let sv = sigma_frac * self.height as f64;
        let du = px[0] - self.cx;
        let dv = px[1] - self.cy;
        (-(du * du / (2.0 * su * su) + dv * dv / (2.0 * sv * sv))).exp()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ColourCandidate {
    pub colour: Rgb,
    pub weight: f64,
}

/// Per-channel weighted mean `Σ w x / Σ w`, kept inside the candidates'
/// channel range so rounding never leaves their convex hull.
pub fn fuse_colours(cands: &[ColourCandidate]) -> Result<Rgb, ColourError> {
    let total: f64 = cands.iter().map(|c| c.weight).sum();
    if cands.is_empty() || !(total > 0.0) {
        return Err(ColourError::NoCandidates);
    }
    let mut out = [0.0; 3];
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for c in cands {
        let w = c.weight / total;
        for k in 0..3 {
            out[k] += w * c.colour[k];
            lo[k] = lo[k].min(c.colour[k]);
            hi[k] = hi[k].max(c.colour[k]);
        }
    }
    Ok([0, 1, 2].map(|k| out[k].clamp(lo[k], hi[k])))
}

/// Indices of points visible from `camera` by the hidden-point-removal operator.
///
/// Points are expressed relative to the camera and spherically flipped about
/// a sphere of radius `max‖p‖ · 10^gamma`; those on the convex hull of the
/// flipped set plus the camera centre are visible. Up to three points are
/// all trivially visible.
pub fn visible_points(points: &[Point], camera: &Vector3<f64>, gamma: f64) -> Result<Vec<usize>, ColourError> {
    if points.len() <= 3 {
        return Ok((0..points.len()).collect());
    }
    let rel: Vec<Vector3<f64>> = points.iter().map(|p| p - camera).collect();
    let norms: Vec<f64> = rel.iter().map(|p| p.norm()).collect();
    if let Some(i) = norms.iter().position(|&n| n == 0.0) {
        return Err(ColourError::CameraOnPoint(i));
    }
    let radius = norms.iter().copied().fold(0.0, f64::max) * 10f64.powf(gamma);
    let mut flipped: Vec<Vector3<f64>> = rel
        .iter()
        .zip(&norms)
        .map(|(p, &n)| p + p * (2.0 * (radius - n) / n))
        .collect();
    flipped.push(Vector3::zeros());
    let origin = points.len();
    let verts = hull_vertices(&flipped).map_err(|_| ColourError::DegenerateHull)?;
    Ok(verts.into_iter().filter(|&i| i != origin).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ColourizeParams {
    /// Exponent of the flip radius multiplier.
    pub gamma: f64,
    /// Gaussian spread as a fraction of the image dimensions.
    pub sigma_frac: f64,
}

impl Default for ColourizeParams {
    fn default() -> Self {
        Self {
            gamma: 2.5,
            sigma_frac: 0.25,
        }
    }
}

/// An RGB image and the vehicle body pose at capture, resolved in the cloud's frame.
#[derive(Debug, Clone)]
pub struct PosedImage {
    pub image: RgbImage,
    pub body_pose: RigidTransform,
}

impl PosedImage {
    /// Loads a PNG or PPM raster.
    pub fn load(path: impl AsRef<Path>, body_pose: RigidTransform) -> Result<Self, image::ImageError> {
        Ok(Self {
            image: image::open(path)?.to_rgb8(),
            body_pose,
        })
    }

    /// Loads `image` and the first row of the pose sidecar beside it
    /// (same stem, `.csv` extension).
    pub fn load_with_sidecar(path: impl AsRef<Path>) -> Result<Self, ImageLoadError> {
        let path = path.as_ref();
        let sidecar = path.with_extension("csv");
        let poses = crate::submap::io::read_poses(std::fs::File::open(&sidecar).map_err(crate::submap::io::IoError::from)?)?;
        let (_, pose) = poses.first().ok_or(ImageLoadError::EmptySidecar)?;
        Ok(Self::load(path, *pose)?)
    }

    /// sRGB colour at the pixel containing `px`.
    pub fn sample(&self, px: &[f64; 2]) -> Rgb {
        let (x, y) = (px[0].floor() as u32, px[1].floor() as u32);
        let p = self.image.get_pixel(x.min(self.image.width() - 1), y.min(self.image.height() - 1));
        [p[0] as f64 / 255.0, p[1] as f64 / 255.0, p[2] as f64 / 255.0]
    }
}

/// A cloud with fused colours plus a mask of points that received any colour.
#[derive(Debug, Clone)]
pub struct ColourizedCloud {
    pub cloud: PointCloud,
    pub coloured: Vec<bool>,
}

/// Colour candidates contributed by one image, as `(point index, candidate)`
/// with the colour in linear RGB.
pub fn image_candidates(
    cloud: &PointCloud,
    image: &PosedImage,
    cam: &CameraModel,
    rig: &SensorRig,
    params: &ColourizeParams,
) -> Result<Vec<(usize, ColourCandidate)>, ColourError> {
    if (image.image.width(), image.image.height()) != (cam.width, cam.height) {
        return Err(ColourError::ImageSize {
            expected: (cam.width, cam.height),
            got: (image.image.width(), image.image.height()),
        });
    }
    let cloud_from_camera = image.body_pose.compose(&rig.camera);
    let camera_from_cloud = cloud_from_camera.inverse();
    // Only points inside the view frustum can occlude one another, since the
    // frustum is a convex cone with its apex at the camera.
    let mut in_view = Vec::new();
    let mut cam_points = Vec::new();
    let mut pixels = Vec::new();
    for (i, p) in cloud.points().iter().enumerate() {
        let pc = camera_from_cloud.apply(p);
        if let Some(px) = cam.project(&pc) {
            in_view.push(i);
            cam_points.push(pc);
            pixels.push(px);
        }
    }
    let visible = match visible_points(&cam_points, &Vector3::zeros(), params.gamma) {
        Ok(v) => v,
        Err(ColourError::DegenerateHull) => {
            log::warn!("degenerate visibility hull over {} points; image skipped", cam_points.len());
            return Ok(Vec::new());
        }
        Err(e) => return Err(e),
    };
    Ok(visible
        .into_iter()
        .map(|k| {
            let px = &pixels[k];
            let colour = image.sample(px).map(srgb_to_linear);
            (
                in_view[k],
                ColourCandidate {
                    colour,
                    weight: cam.gaussian_weight(px, params.sigma_frac),
                },
            )
        })
        .collect())
}

/// Colours every point seen by at least one image; unseen points are black
/// and flagged `false` in [`ColourizedCloud::coloured`].
pub fn colourize_submap(
    cloud: &PointCloud,
    images: &[PosedImage],
    cam: &CameraModel,
    rig: &SensorRig,
    params: &ColourizeParams,
) -> Result<ColourizedCloud, ColourError> {
    let mut candidates: Vec<Vec<ColourCandidate>> = vec![Vec::new(); cloud.len()];
    for image in images {
        for (i, cand) in image_candidates(cloud, image, cam, rig, params)? {
            candidates[i].push(cand);
        }
    }
    let mut coloured = vec![false; cloud.len()];
    let colours: Vec<Rgb> = candidates
        .iter()
        .enumerate()
        .map(|(i, c)| match fuse_colours(c) {
            Ok(lin) => {
                coloured[i] = true;
                lin.map(|v| linear_to_srgb(v).clamp(0.0, 1.0))
            }
            Err(_) => [0.0; 3],
        })
        .collect();
    let mut out = PointCloud::new(cloud.points().to_vec()).expect("finite input");
    if let Some(n) = cloud.normals() {
        out = out.with_normals(n.to_vec()).expect("same length");
    }
    let out = out.with_colours(colours).expect("clamped colours");
    Ok(ColourizedCloud { cloud: out, coloured })
}
