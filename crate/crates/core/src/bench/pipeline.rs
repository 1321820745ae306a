//! Detect, describe, match, coarse and fine alignment on one case, with
//! self-consistency residuals at each stage.

use std::fmt;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::{BenchConfig, PreparedCase};
use crate::alignment::{coarse_align, fine_align, match_descriptors, self_consistency, AlignmentReport, ResidualStats};
use crate::cloud::Twist;
use crate::descriptors::{describe, DescriptorKind};
use crate::keypoints::{detect, DetectorKind};
use crate::scene::Category;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Initial,
    Detection,
    Description,
    Matching,
    Coarse,
    Fine,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Stage::Initial => "initial",
            Stage::Detection => "detection",
            Stage::Description => "description",
            Stage::Matching => "matching",
            Stage::Coarse => "coarse",
            Stage::Fine => "fine",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("{stage} stage failed: {message}")]
pub struct PipelineError {
    pub stage: Stage,
    pub message: String,
}

fn at<E: ToString>(stage: Stage) -> impl Fn(E) -> PipelineError {
    move |e| PipelineError {
        stage,
        message: e.to_string(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineResult {
    pub case: String,
    pub category: Category,
    pub detector: DetectorKind,
    pub descriptor: DescriptorKind,
    pub perturbation: Twist,
    /// Residuals under the navigation-only estimate.
    pub initial: ResidualStats,
    pub initial_error: Twist,
    pub coarse: AlignmentReport,
    pub fine: AlignmentReport,
    pub extraction_ms: f64,
    pub matching_ms: f64,
    pub coarse_ms: f64,
    pub fine_ms: f64,
}

impl PipelineResult {
    /// Median residual at the initial, coarse and fine stages.
    pub fn medians(&self) -> [f64; 3] {
        let m = |r: &AlignmentReport| r.consistency.as_ref().map_or(f64::NAN, |c| c.median);
        [self.initial.median, m(&self.coarse), m(&self.fine)]
    }

    /// Strict decrease of the median residual across the three stages.
    pub fn is_monotone(&self) -> bool {
        let [a, b, c] = self.medians();
        a > b && b > c
    }
}

fn elapsed_ms(start: Instant) -> f64 {
    start.elapsed().as_secs_f64() * 1e3
}

/// Runs the full chain once. Residuals are measured with
/// `config.consistency_radius` at every stage so that they are comparable.
pub fn run_full_pipeline(
    case: &PreparedCase,
    detector: DetectorKind,
    descriptor: DescriptorKind,
    config: &BenchConfig,
) -> Result<PipelineResult, PipelineError> {
    let (src, tgt) = (case.source(), case.target());
    let radius = config.consistency_radius;
    let initial = self_consistency(src, tgt, &case.initial, radius).map_err(at(Stage::Initial))?;
    let initial_error = crate::alignment::se3_error(&case.initial, &case.truth).map_err(at(Stage::Initial))?;

    let start = Instant::now();
    let params = config.detector_params.params(detector);
    let src_kp = detect(detector, src, &params).map_err(at(Stage::Detection))?;
    let tgt_kp = detect(detector, tgt, &params).map_err(at(Stage::Detection))?;
    let src_d = describe(descriptor, src, &src_kp, &config.descriptor_params).map_err(at(Stage::Description))?;
    let tgt_d = describe(descriptor, tgt, &tgt_kp, &config.descriptor_params).map_err(at(Stage::Description))?;
    let extraction_ms = elapsed_ms(start);

    let start = Instant::now();
    let corr = match_descriptors(&src_d, &tgt_d, config.match_k).map_err(at(Stage::Matching))?;
    let matching_ms = elapsed_ms(start);

    let start = Instant::now();
    let src_pts: Vec<_> = src_d.keypoints.iter().map(|&i| src.points()[i]).collect();
    let tgt_pts: Vec<_> = tgt_d.keypoints.iter().map(|&i| tgt.points()[i]).collect();
    let mut coarse = coarse_align(&corr, &src_pts, &tgt_pts, &config.coarse).map_err(at(Stage::Coarse))?;
    let coarse_ms = elapsed_ms(start);
    coarse.score(&case.truth).map_err(at(Stage::Coarse))?;
    coarse.consistency = Some(self_consistency(src, tgt, &coarse.transform, radius).map_err(at(Stage::Coarse))?);

    let start = Instant::now();
    let mut fine = fine_align(src, tgt, &coarse.transform, &config.fine).map_err(at(Stage::Fine))?;
    let fine_ms = elapsed_ms(start);
    fine.score(&case.truth).map_err(at(Stage::Fine))?;
    fine.consistency = Some(self_consistency(src, tgt, &fine.transform, radius).map_err(at(Stage::Fine))?);

    Ok(PipelineResult {
        case: case.name.clone(),
        category: case.category,
        detector,
        descriptor,
        perturbation: case.perturbation,
        initial,
        initial_error,
        coarse,
        fine,
        extraction_ms,
        matching_ms,
        coarse_ms,
        fine_ms,
    })
}

/// Flat CSV form of a pipeline run; stage columns are empty after a failure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineRow {
    pub case: String,
    pub category: Category,
    pub detector: DetectorKind,
    pub descriptor: DescriptorKind,
    pub perturbation_rotation_deg: f64,
    pub perturbation_translation: f64,
    pub initial_median: Option<f64>,
    pub initial_mean: Option<f64>,
    pub initial_p95: Option<f64>,
    pub coarse_median: Option<f64>,
    pub coarse_mean: Option<f64>,
    pub coarse_p95: Option<f64>,
    pub fine_median: Option<f64>,
    pub fine_mean: Option<f64>,
    pub fine_p95: Option<f64>,
    pub coarse_rotation_error_deg: Option<f64>,
    pub coarse_translation_error: Option<f64>,
    pub fine_rotation_error_deg: Option<f64>,
    pub fine_translation_error: Option<f64>,
    pub failure_stage: Option<Stage>,
    pub failure_reason: Option<String>,
}

impl PipelineRow {
    pub fn new(case: &PreparedCase, detector: DetectorKind, descriptor: DescriptorKind, outcome: &Result<PipelineResult, PipelineError>) -> Self {
        let mut row = Self {
            case: case.name.clone(),
            category: case.category,
            detector,
            descriptor,
            perturbation_rotation_deg: case.perturbation.rotation.norm().to_degrees(),
            perturbation_translation: case.perturbation.translation.norm(),
            initial_median: None,
            initial_mean: None,
            initial_p95: None,
            coarse_median: None,
            coarse_mean: None,
            coarse_p95: None,
            fine_median: None,
            fine_mean: None,
            fine_p95: None,
            coarse_rotation_error_deg: None,
            coarse_translation_error: None,
            fine_rotation_error_deg: None,
            fine_translation_error: None,
            failure_stage: None,
            failure_reason: None,
        };
        match outcome {
            Ok(r) => {
                (row.initial_median, row.initial_mean, row.initial_p95) = (Some(r.initial.median), Some(r.initial.mean), Some(r.initial.p95));
                let stats = |a: &AlignmentReport| a.consistency.as_ref().map(|c| (c.median, c.mean, c.p95));
                if let Some((m, a, p)) = stats(&r.coarse) {
                    (row.coarse_median, row.coarse_mean, row.coarse_p95) = (Some(m), Some(a), Some(p));
                }
                if let Some((m, a, p)) = stats(&r.fine) {
                    (row.fine_median, row.fine_mean, row.fine_p95) = (Some(m), Some(a), Some(p));
                }
                let errs = |a: &AlignmentReport| a.error.map(|e| (e.rotation.norm().to_degrees(), e.translation.norm()));
                if let Some((rot, tr)) = errs(&r.coarse) {
                    (row.coarse_rotation_error_deg, row.coarse_translation_error) = (Some(rot), Some(tr));
                }
                if let Some((rot, tr)) = errs(&r.fine) {
                    (row.fine_rotation_error_deg, row.fine_translation_error) = (Some(rot), Some(tr));
                }
            }
            Err(e) => {
                row.failure_stage = Some(e.stage);
                row.failure_reason = Some(e.message.clone());
            }
        }
        row
    }
}
