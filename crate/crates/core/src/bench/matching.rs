//! Detector × descriptor grid over loop-closure cases.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{timed, BenchConfig, BenchError, PreparedCase};
use crate::alignment::{coarse_align, match_descriptors, se3_error};
use crate::descriptors::{describe, DescriptorKind};
use crate::keypoints::{detect, DetectorKind, KeypointSet};
use crate::scene::Category;

/// Where a (case, pair) cell stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FailureStage {
    Detection,
    Description,
    Matching,
    Coarse,
    /// Coarse alignment converged, but 1 m or more from the truth.
    Accuracy,
}

/// One (case, detector, descriptor) outcome. Timings are medians in
/// milliseconds; extraction covers detection and description on both
/// submaps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchRow {
    pub case: String,
    pub category: Category,
    pub detector: DetectorKind,
    pub descriptor: DescriptorKind,
    pub success: bool,
    pub failure_stage: Option<FailureStage>,
    pub failure_reason: Option<String>,
    pub source_keypoints: usize,
    pub target_keypoints: usize,
    pub correspondences: usize,
    pub inliers: usize,
    pub recall: f64,
    pub rotation_error_deg: Option<f64>,
    pub translation_error: Option<f64>,
    pub extraction_ms: f64,
    pub matching_ms: f64,
    pub coarse_ms: f64,
}

impl MatchRow {
    fn empty(case: &PreparedCase, detector: DetectorKind, descriptor: DescriptorKind) -> Self {
        Self {
            case: case.name.clone(),
            category: case.category,
            detector,
            descriptor,
            success: false,
            failure_stage: None,
            failure_reason: None,
            source_keypoints: 0,
            target_keypoints: 0,
            correspondences: 0,
            inliers: 0,
            recall: 0.0,
            rotation_error_deg: None,
            translation_error: None,
            extraction_ms: 0.0,
            matching_ms: 0.0,
            coarse_ms: 0.0,
        }
    }

    fn fail(mut self, stage: FailureStage, reason: impl ToString) -> Self {
        self.failure_stage = Some(stage);
        self.failure_reason = Some(reason.to_string());
        self
    }

    /// Same row with every timing zeroed, for comparing reruns.
    pub fn without_timings(&self) -> Self {
        Self {
            extraction_ms: 0.0,
            matching_ms: 0.0,
            coarse_ms: 0.0,
            ..self.clone()
        }
    }
}

/// Translation error at or above which a converged coarse alignment still
/// counts as a failure, metres.
pub const SUCCESS_TRANSLATION: f64 = 1.0;

/// Runs every configured pair on every case. A cell that fails at any stage
/// yields a typed failure row; the run itself only stops on a thread-pool
/// error. Rows are ordered by case, then detector, then descriptor.
pub fn run_matching_bench(cases: &[PreparedCase], config: &BenchConfig) -> Result<Vec<MatchRow>, BenchError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers)
        .build()
        .map_err(|e| BenchError::Config(e.to_string()))?;
    let per_case: Vec<Vec<MatchRow>> = pool.install(|| cases.par_iter().map(|case| case_rows(case, config)).collect());
    Ok(per_case.into_iter().flatten().collect())
}

fn case_rows(case: &PreparedCase, config: &BenchConfig) -> Vec<MatchRow> {
    let reps = config.repetitions;
    let mut rows = Vec::with_capacity(config.detectors.len() * config.descriptors.len());
    for &detector in &config.detectors {
        let params = config.detector_params.params(detector);
        // Source then target, each with its median detection time.
        let detections: Vec<(Result<KeypointSet, _>, f64)> = [case.source(), case.target()]
            .iter()
            .map(|cloud| timed(reps, || detect(detector, cloud, &params)))
            .collect();
        let detect_ms = detections[0].1 + detections[1].1;
        for &descriptor in &config.descriptors {
            let mut row = MatchRow::empty(case, detector, descriptor);
            row.extraction_ms = detect_ms;
            let (src_kp, tgt_kp) = match (&detections[0].0, &detections[1].0) {
                (Ok(a), Ok(b)) => (a, b),
                (Err(e), _) | (_, Err(e)) => {
                    rows.push(row.fail(FailureStage::Detection, e));
                    continue;
                }
            };
            row.source_keypoints = src_kp.len();
            row.target_keypoints = tgt_kp.len();
            rows.push(run_pair(case, src_kp, tgt_kp, row, config));
        }
        log::info!("{}: {} done", case.name, detector.name());
    }
    rows
}

fn run_pair(case: &PreparedCase, src_kp: &KeypointSet, tgt_kp: &KeypointSet, mut row: MatchRow, config: &BenchConfig) -> MatchRow {
    let reps = config.repetitions;
    let kind = row.descriptor;
    let dp = &config.descriptor_params;
    let (src_d, ms_a) = timed(reps, || describe(kind, case.source(), src_kp, dp));
    let (tgt_d, ms_b) = timed(reps, || describe(kind, case.target(), tgt_kp, dp));
    row.extraction_ms += ms_a + ms_b;
    let (src_d, tgt_d) = match (src_d, tgt_d) {
        (Ok(a), Ok(b)) => (a, b),
        (Err(e), _) | (_, Err(e)) => return row.fail(FailureStage::Description, e),
    };
    let (corr, ms) = timed(reps, || match_descriptors(&src_d, &tgt_d, config.match_k));
    row.matching_ms = ms;
    let corr = match corr {
        Ok(c) => c,
        Err(e) => return row.fail(FailureStage::Matching, e),
    };
    row.correspondences = corr.len();
    let src_pts: Vec<_> = src_d.keypoints.iter().map(|&i| case.source().points()[i]).collect();
    let tgt_pts: Vec<_> = tgt_d.keypoints.iter().map(|&i| case.target().points()[i]).collect();
    let (coarse, ms) = timed(reps, || coarse_align(&corr, &src_pts, &tgt_pts, &config.coarse));
    row.coarse_ms = ms;
    let report = match coarse {
        Ok(r) => r,
        Err(e) => return row.fail(FailureStage::Coarse, e),
    };
    row.inliers = report.inliers;
    row.recall = report.recall;
    let err = match se3_error(&report.transform, &case.truth) {
        Ok(e) => e,
        Err(e) => return row.fail(FailureStage::Coarse, e),
    };
    let rho = err.translation.norm();
    row.rotation_error_deg = Some(err.rotation.norm().to_degrees());
    row.translation_error = Some(rho);
    if rho < SUCCESS_TRANSLATION {
        row.success = true;
        row
    } else {
        row.fail(FailureStage::Accuracy, format!("translation error {rho:.3} m"))
    }
}
