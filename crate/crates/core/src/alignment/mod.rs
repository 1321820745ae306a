//! Descriptor matching, robust coarse alignment, point-to-plane ICP and the
//! error metrics used to score them.
//!
//! Every estimated transform maps source coordinates into the target frame:
//! `tgt ≈ T · src`.

mod coarse;
mod fine;
mod matching;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cloud::{RigidTransform, TransformError, Twist};
use crate::descriptors::DescriptorKind;

pub use coarse::{coarse_align, fit_rigid, CoarseParams};
pub use fine::{fine_align, self_consistency, FineParams, ResidualStats};
pub use matching::{match_descriptors, Correspondence, CorrespondenceSet};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AlignError {
    #[error("cannot match {0} descriptors against {1}")]
    KindMismatch(DescriptorKind, DescriptorKind),
    #[error("descriptor set has no usable rows")]
    EmptyDescriptors,
    #[error("{0} correspondences, at least 3 needed")]
    InsufficientCorrespondences(usize),
    #[error("coarse alignment found {inliers} inliers among {features} correspondences")]
    AlignmentFailed {
        inliers: usize,
        features: usize,
        /// Best consensus transform, if any sample produced one.
        best: Option<RigidTransform>,
    },
    #[error("only {0} correspondences within range")]
    NoOverlap(usize),
    #[error("both clouds need normals")]
    MissingNormals,
    #[error("invalid parameters: {0}")]
    BadParams(&'static str),
    #[error(transparent)]
    Transform(#[from] TransformError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignmentReport {
    pub transform: RigidTransform,
    pub inliers: usize,
    /// Mutual correspondences entering coarse alignment (ICP: correspondences
    /// in the final iteration).
    pub features: usize,
    pub recall: f64,
    pub iterations: usize,
    /// Error against a reference transform, when one is known.
    pub error: Option<Twist>,
    pub consistency: Option<ResidualStats>,
}

impl AlignmentReport {
    fn new(transform: RigidTransform, inliers: usize, features: usize, iterations: usize) -> Self {
        let recall = if features == 0 { 0.0 } else { inliers as f64 / features as f64 };
        Self {
            transform,
            inliers,
            features,
            recall,
            iterations,
            error: None,
            consistency: None,
        }
    }

    /// Fills [`AlignmentReport::error`] against `reference`.
    pub fn score(&mut self, reference: &RigidTransform) -> Result<Twist, TransformError> {
        let e = se3_error(&self.transform, reference)?;
        self.error = Some(e);
        Ok(e)
    }
}

/// `log(estimate⁻¹ · reference)`.
pub fn se3_error(estimate: &RigidTransform, reference: &RigidTransform) -> Result<Twist, TransformError> {
    if !reference.is_valid() {
        return Err(TransformError::NotARotation {
            orthogonality: f64::NAN,
            det: reference.rotation().determinant(),
        });
    }
    estimate.inverse().compose(reference).log()
}

#[cfg(test)]
mod tests;
