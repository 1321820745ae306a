//! Rigid transforms in SE(3) and their twist coordinates.
//!
//! Twists are ordered rotation-first, `[phi; rho]`, which is the layout used
//! when reporting alignment errors.

use std::f64::consts::PI;
use std::ops::Mul;

use nalgebra::{Matrix3, Matrix4, Quaternion, UnitQuaternion, Vector3, Vector6};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Tolerance on `RᵀR = I` and `det R = 1` for a valid rotation.
pub const ROTATION_TOLERANCE: f64 = 1e-9;

/// `log` refuses rotations whose angle is within this of π.
pub const NEAR_PI_MARGIN: f64 = 1e-6;

const SMALL_ANGLE: f64 = 1e-4;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TransformError {
    #[error("rotation angle {angle} is within {margin} of pi; log is ill-conditioned")]
    AngleNearPi { angle: f64, margin: f64 },
    #[error("matrix is not a rotation (orthogonality error {orthogonality:e}, det {det})")]
    NotARotation { orthogonality: f64, det: f64 },
    #[error("non-finite transform component")]
    NonFinite,
}

/// Element of se(3): rotational part `phi` (radians) and translational part `rho` (metres).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Twist {
    pub rotation: Vector3<f64>,
    pub translation: Vector3<f64>,
}

impl Twist {
    pub fn new(rotation: Vector3<f64>, translation: Vector3<f64>) -> Self {
        Self {
            rotation,
            translation,
        }
    }

    pub fn zero() -> Self {
        Self::default()
    }

    /// `[phi; rho]`
    pub fn to_vector(&self) -> Vector6<f64> {
        let r = &self.rotation;
        let t = &self.translation;
        Vector6::new(r.x, r.y, r.z, t.x, t.y, t.z)
    }

    pub fn from_vector(v: &Vector6<f64>) -> Self {
        Self {
            rotation: Vector3::new(v[0], v[1], v[2]),
            translation: Vector3::new(v[3], v[4], v[5]),
        }
    }

    pub fn rotation_norm(&self) -> f64 {
        self.rotation.norm()
    }

    pub fn translation_norm(&self) -> f64 {
        self.translation.norm()
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self::new(self.rotation * s, self.translation * s)
    }

    pub fn is_finite(&self) -> bool {
        self.to_vector().iter().all(|v| v.is_finite())
    }
}

/// Skew-symmetric matrix such that `hat(a) * b == a.cross(&b)`.
#[rustfmt::skip]
pub fn hat(v: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(
         0.0, -v.z,  v.y,
         v.z,  0.0, -v.x,
        -v.y,  v.x,  0.0,
    )
}

/// Rodrigues' formula.
pub fn so3_exp(phi: &Vector3<f64>) -> Matrix3<f64> {
    let theta2 = phi.norm_squared();
    let w = hat(phi);
    let w2 = w * w;
    let (a, b) = if theta2 < SMALL_ANGLE * SMALL_ANGLE {
        (
            1.0 - theta2 / 6.0 + theta2 * theta2 / 120.0,
            0.5 - theta2 / 24.0 + theta2 * theta2 / 720.0,
        )
    } else {
        let theta = theta2.sqrt();
        (theta.sin() / theta, (1.0 - theta.cos()) / theta2)
    };
    Matrix3::identity() + w * a + w2 * b
}

/// Rotation vector of `r`. Fails when the angle is within [`NEAR_PI_MARGIN`] of π.
pub fn so3_log(r: &Matrix3<f64>) -> Result<Vector3<f64>, TransformError> {
    // sin(theta) * axis
    let s = 0.5 * Vector3::new(r[(2, 1)] - r[(1, 2)], r[(0, 2)] - r[(2, 0)], r[(1, 0)] - r[(0, 1)]);
    let cos_theta = (0.5 * (r.trace() - 1.0)).clamp(-1.0, 1.0);
    let sin_theta = s.norm();
    let theta = sin_theta.atan2(cos_theta);
    if theta > PI - NEAR_PI_MARGIN {
        return Err(TransformError::AngleNearPi {
            angle: theta,
            margin: NEAR_PI_MARGIN,
        });
    }
    if theta < SMALL_ANGLE {
        // theta / sin(theta) ~ 1 + theta^2 / 6
        return Ok(s * (1.0 + theta * theta / 6.0 + 7.0 * theta.powi(4) / 360.0));
    }
    if cos_theta > -0.5 {
        return Ok(s * (theta / sin_theta));
    }
    // Large angles: recover the axis from the symmetric part, which stays
    // well conditioned where sin(theta) vanishes.
    let b = (r + r.transpose()) * 0.5 - Matrix3::identity() * cos_theta;
    let diag = [b[(0, 0)], b[(1, 1)], b[(2, 2)]];
    let k = (0..3)
        .max_by(|&i, &j| diag[i].total_cmp(&diag[j]))
        .unwrap_or(0);
    let mut axis: Vector3<f64> = b.column(k).into();
    axis /= axis.norm();
    if axis.dot(&s) < 0.0 {
        axis = -axis;
    }
    Ok(axis * theta)
}

/// Left Jacobian of SO(3), the `V` matrix of the SE(3) exponential.
fn so3_left_jacobian(phi: &Vector3<f64>) -> Matrix3<f64> {
    let theta2 = phi.norm_squared();
    let w = hat(phi);
    let w2 = w * w;
    let (a, b) = if theta2 < SMALL_ANGLE * SMALL_ANGLE {
        (
            0.5 - theta2 / 24.0 + theta2 * theta2 / 720.0,
            1.0 / 6.0 - theta2 / 120.0 + theta2 * theta2 / 5040.0,
        )
    } else {
        let theta = theta2.sqrt();
        (
            (1.0 - theta.cos()) / theta2,
            (theta - theta.sin()) / (theta2 * theta),
        )
    };
    Matrix3::identity() + w * a + w2 * b
}

fn so3_left_jacobian_inverse(phi: &Vector3<f64>) -> Matrix3<f64> {
    let theta2 = phi.norm_squared();
    let w = hat(phi);
    let w2 = w * w;
    let c = if theta2 < SMALL_ANGLE * SMALL_ANGLE {
        1.0 / 12.0 + theta2 / 720.0 + theta2 * theta2 / 30240.0
    } else {
        let theta = theta2.sqrt();
        (1.0 - theta * theta.sin() / (2.0 * (1.0 - theta.cos()))) / theta2
    };
    Matrix3::identity() - w * 0.5 + w2 * c
}

/// Pose in SE(3): `p' = R p + t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidTransform {
    rotation: Matrix3<f64>,
    translation: Vector3<f64>,
}

impl Default for RigidTransform {
    fn default() -> Self {
        Self::identity()
    }
}

fn orthogonality_error(r: &Matrix3<f64>) -> f64 {
    (r.transpose() * r - Matrix3::identity()).amax()
}

/// Nearest rotation in the Frobenius sense.
fn orthonormalize(r: &Matrix3<f64>) -> Matrix3<f64> {
    let svd = r.svd(true, true);
    let (u, vt) = (svd.u.unwrap(), svd.v_t.unwrap());
    let mut d = Matrix3::identity();
    if (u * vt).determinant() < 0.0 {
        d[(2, 2)] = -1.0;
    }
    u * d * vt
}

impl RigidTransform {
    pub fn identity() -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
        }
    }

    /// Validating constructor.
    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Result<Self, TransformError> {
        if !rotation.iter().chain(translation.iter()).all(|v| v.is_finite()) {
            return Err(TransformError::NonFinite);
        }
        let orthogonality = orthogonality_error(&rotation);
        let det = rotation.determinant();
        if orthogonality > ROTATION_TOLERANCE || (det - 1.0).abs() > ROTATION_TOLERANCE {
            return Err(TransformError::NotARotation { orthogonality, det });
        }
        Ok(Self {
            rotation,
            translation,
        })
    }

    /// Projects an approximately orthogonal matrix onto SO(3).
    pub fn from_approximate(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Self {
        Self {
            rotation: orthonormalize(&rotation),
            translation,
        }
    }

    pub fn from_translation(translation: Vector3<f64>) -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation,
        }
    }

    pub fn from_rotation(rotation: Matrix3<f64>) -> Result<Self, TransformError> {
        Self::new(rotation, Vector3::zeros())
    }

    /// Rotation about the z axis (the world vertical).
    pub fn rotation_z(angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        Self {
            rotation: Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0),
            translation: Vector3::zeros(),
        }
    }

    /// From a quaternion `(w, x, y, z)`; normalized on the way in.
    pub fn from_quaternion(q: [f64; 4], translation: Vector3<f64>) -> Self {
        let uq = UnitQuaternion::from_quaternion(Quaternion::new(q[0], q[1], q[2], q[3]));
        Self {
            rotation: uq.to_rotation_matrix().into_inner(),
            translation,
        }
    }

    /// `(w, x, y, z)` with `w >= 0`.
    pub fn quaternion(&self) -> [f64; 4] {
        let uq = UnitQuaternion::from_matrix(&self.rotation);
        let q = uq.quaternion();
        let s = if q.w < 0.0 { -1.0 } else { 1.0 };
        [s * q.w, s * q.i, s * q.j, s * q.k]
    }

    pub fn rotation(&self) -> &Matrix3<f64> {
        &self.rotation
    }

    pub fn translation(&self) -> &Vector3<f64> {
        &self.translation
    }

    pub fn apply(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * p + self.translation
    }

    pub fn apply_vector(&self, v: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * v
    }

    /// `self ∘ other`: applies `other` first.
    pub fn compose(&self, other: &RigidTransform) -> RigidTransform {
        let mut rotation = self.rotation * other.rotation;
        if orthogonality_error(&rotation) > ROTATION_TOLERANCE {
            rotation = orthonormalize(&rotation);
        }
        RigidTransform {
            rotation,
            translation: self.rotation * other.translation + self.translation,
        }
    }

    pub fn inverse(&self) -> RigidTransform {
        let rt = self.rotation.transpose();
        RigidTransform {
            rotation: rt,
            translation: -(rt * self.translation),
        }
    }

    pub fn exp(xi: &Twist) -> RigidTransform {
        RigidTransform {
            rotation: so3_exp(&xi.rotation),
            translation: so3_left_jacobian(&xi.rotation) * xi.translation,
        }
    }

    pub fn log(&self) -> Result<Twist, TransformError> {
        let phi = so3_log(&self.rotation)?;
        let rho = so3_left_jacobian_inverse(&phi) * self.translation;
        Ok(Twist::new(phi, rho))
    }

    /// Rotation angle in radians, in `[0, π]`.
    pub fn angle(&self) -> f64 {
        let s = 0.5
            * Vector3::new(
                self.rotation[(2, 1)] - self.rotation[(1, 2)],
                self.rotation[(0, 2)] - self.rotation[(2, 0)],
                self.rotation[(1, 0)] - self.rotation[(0, 1)],
            );
        s.norm().atan2(0.5 * (self.rotation.trace() - 1.0))
    }

    /// Geodesic interpolation: slerp on the rotation, lerp on the translation.
    pub fn interpolate(&self, other: &RigidTransform, s: f64) -> RigidTransform {
        let delta = self.rotation.transpose() * other.rotation;
        let phi = match so3_log(&delta) {
            Ok(phi) => phi,
            // Exactly antipodal rotations have no unique geodesic; fall back to
            // the quaternion route, which picks one.
            Err(_) => {
                let a = UnitQuaternion::from_matrix(&self.rotation);
                let b = UnitQuaternion::from_matrix(&other.rotation);
                let q = a.slerp(&b, s);
                return RigidTransform {
                    rotation: q.to_rotation_matrix().into_inner(),
                    translation: self.translation * (1.0 - s) + other.translation * s,
                };
            }
        };
        RigidTransform {
            rotation: self.rotation * so3_exp(&(phi * s)),
            translation: self.translation * (1.0 - s) + other.translation * s,
        }
    }

    pub fn to_matrix(&self) -> Matrix4<f64> {
        let mut m = Matrix4::identity();
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(&self.rotation);
        m.fixed_view_mut::<3, 1>(0, 3).copy_from(&self.translation);
        m
    }

    pub fn from_matrix(m: &Matrix4<f64>) -> Result<Self, TransformError> {
        Self::new(
            m.fixed_view::<3, 3>(0, 0).into_owned(),
            m.fixed_view::<3, 1>(0, 3).into_owned(),
        )
    }

    /// Row-major 4x4, as written to JSON reports.
    pub fn to_row_major(&self) -> [f64; 16] {
        let m = self.to_matrix();
        let mut out = [0.0; 16];
        for r in 0..4 {
            for c in 0..4 {
                out[4 * r + c] = m[(r, c)];
            }
        }
        out
    }

    pub fn from_row_major(v: &[f64; 16]) -> Result<Self, TransformError> {
        Self::from_matrix(&Matrix4::from_row_slice(v))
    }

    pub fn is_valid(&self) -> bool {
        orthogonality_error(&self.rotation) <= ROTATION_TOLERANCE
            && (self.rotation.determinant() - 1.0).abs() <= ROTATION_TOLERANCE
    }
}

impl Mul for RigidTransform {
    type Output = RigidTransform;
    fn mul(self, rhs: RigidTransform) -> RigidTransform {
        self.compose(&rhs)
    }
}

impl Mul<&RigidTransform> for &RigidTransform {
    type Output = RigidTransform;
    fn mul(self, rhs: &RigidTransform) -> RigidTransform {
        self.compose(rhs)
    }
}

impl Serialize for RigidTransform {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.to_row_major().serialize(s)
    }
}

impl<'de> Deserialize<'de> for RigidTransform {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let v = <[f64; 16]>::deserialize(d)?;
        // Accept small drift from text round-trips.
        let m = Matrix4::from_row_slice(&v);
        let r = m.fixed_view::<3, 3>(0, 0).into_owned();
        if orthogonality_error(&r) > 1e-6 {
            return Err(serde::de::Error::custom("rotation block is not orthogonal"));
        }
        Ok(RigidTransform::from_approximate(
            r,
            m.fixed_view::<3, 1>(0, 3).into_owned(),
        ))
    }
}
