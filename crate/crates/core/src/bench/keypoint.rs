//! Repeatability sweeps over a set of clouds.

use serde::{Deserialize, Serialize};

use super::{timed, BenchConfig, BenchError};
use crate::cloud::PointCloud;
use crate::keypoints::{detect, noise_sweep, rotation_sweep, DetectorKind, SweepVariable};

/// One sweep point for one detector on one cloud.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepeatabilityRow {
    pub cloud: String,
    pub detector: DetectorKind,
    pub variable: SweepVariable,
    pub value: f64,
    pub r: f64,
    pub repeatable: usize,
    pub reference: usize,
    pub detected: usize,
}

/// Median detection time for one detector on one cloud.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionTiming {
    pub cloud: String,
    pub detector: DetectorKind,
    pub points: usize,
    pub keypoints: usize,
    pub median_ms: f64,
}

/// Rotation then noise sweep for every detector on every named cloud.
/// Rows come out cloud-major, then detector, then sweep point, so there are
/// `clouds × detectors × 30` of them.
pub fn run_keypoint_bench(
    clouds: &[(String, PointCloud)],
    config: &BenchConfig,
) -> Result<(Vec<RepeatabilityRow>, Vec<DetectionTiming>), BenchError> {
    let mut rows = Vec::new();
    let mut timings = Vec::new();
    for (ci, (name, cloud)) in clouds.iter().enumerate() {
        let cloud = cloud.clone().set_resolution(cloud.resolution());
        for &kind in &config.detectors {
            let params = config.detector_params.params(kind);
            let (kp, ms) = timed(config.repetitions, || detect(kind, &cloud, &params));
            timings.push(DetectionTiming {
                cloud: name.clone(),
                detector: kind,
                points: cloud.len(),
                keypoints: kp?.len(),
                median_ms: ms,
            });
            let seed = config.noise_seed.wrapping_add(1000 * ci as u64);
            let sweeps = rotation_sweep(&cloud, kind, &params)?.into_iter().chain(noise_sweep(&cloud, kind, &params, seed)?);
            rows.extend(sweeps.map(|r| RepeatabilityRow {
                cloud: name.clone(),
                detector: kind,
                variable: r.variable,
                value: r.value,
                r: r.r,
                repeatable: r.repeatable,
                reference: r.reference,
                detected: r.detected,
            }));
            log::info!("{name}: {} swept", kind.name());
        }
    }
    Ok((rows, timings))
}

/// Mean and 2.5/97.5 percentile band of `r` across clouds at one sweep point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepAggregate {
    pub detector: DetectorKind,
    pub variable: SweepVariable,
    pub value: f64,
    pub clouds: usize,
    pub mean: f64,
    pub lower: f64,
    pub upper: f64,
}

/// Groups rows by (detector, variable, value) in first-seen order.
pub fn aggregate_sweeps(rows: &[RepeatabilityRow]) -> Vec<SweepAggregate> {
    let mut groups: Vec<((DetectorKind, SweepVariable, f64), Vec<f64>)> = Vec::new();
    for row in rows {
        let key = (row.detector, row.variable, row.value);
        match groups.iter_mut().find(|(k, _)| *k == key) {
            Some((_, v)) => v.push(row.r),
            None => groups.push((key, vec![row.r])),
        }
    }
    groups
        .into_iter()
        .map(|((detector, variable, value), mut rs)| {
            rs.sort_by(f64::total_cmp);
            SweepAggregate {
                detector,
                variable,
                value,
                clouds: rs.len(),
                mean: rs.iter().sum::<f64>() / rs.len() as f64,
                lower: quantile(&rs, 0.025),
                upper: quantile(&rs, 0.975),
            }
        })
        .collect()
}

/// Linear-interpolated quantile of sorted, non-empty data.
pub(crate) fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}
