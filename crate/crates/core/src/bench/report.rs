//! Aggregate tables, acceptance checks and the on-disk outputs.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::keypoint::{aggregate_sweeps, SweepAggregate};
use super::{
    ensure_dir, prepare_case, run_full_pipeline, run_keypoint_bench, run_matching_bench, thin, BenchConfig, BenchError,
    DetectionTiming, MatchRow, PipelineRow, PreparedCase, RepeatabilityRow,
};
use crate::descriptors::DescriptorKind;
use crate::keypoints::{DetectorKind, SweepVariable};
use crate::scene::Category;

/// Detectors expected to be invariant to rotation about the vertical.
pub const ROTATION_INVARIANT: [DetectorKind; 6] = [
    DetectorKind::Iss,
    DetectorKind::Harris3d,
    DetectorKind::Lowe,
    DetectorKind::Tomasi,
    DetectorKind::Harris6d,
    DetectorKind::Sift3d,
];

/// Minimum repeatability required of [`ROTATION_INVARIANT`] detectors.
pub const ROTATION_MIN_R: f64 = 0.99;

/// Largest acceptable median residual after fine alignment, metres.
pub const FINE_MEDIAN_BOUND: f64 = 0.1;

/// Percent success of one detector/descriptor pair over all cases.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairCell {
    pub detector: DetectorKind,
    pub descriptor: DescriptorKind,
    pub cases: usize,
    pub successes: usize,
    pub percent: f64,
}

/// Percent success and mean stage timings of one descriptor on one scene
/// category, pooled over detectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryCell {
    pub descriptor: DescriptorKind,
    pub category: Category,
    pub runs: usize,
    pub successes: usize,
    pub percent: f64,
    pub extraction_ms: f64,
    pub matching_ms: f64,
    pub coarse_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingRow {
    pub source: String,
    pub case: String,
    pub detector: DetectorKind,
    pub descriptor: Option<DescriptorKind>,
    pub detection_ms: Option<f64>,
    pub extraction_ms: Option<f64>,
    pub matching_ms: Option<f64>,
    pub coarse_ms: Option<f64>,
    pub fine_ms: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: &str, passed: bool, detail: String) -> Self {
        Self {
            name: name.to_string(),
            passed,
            detail,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchSummary {
    pub cases: usize,
    pub sweeps: Vec<SweepAggregate>,
    /// Mean detection time per submap, per detector.
    pub detection_ms: Vec<(DetectorKind, f64)>,
    pub pairs: Vec<PairCell>,
    pub categories: Vec<CategoryCell>,
    pub checks: Vec<Check>,
}

impl BenchSummary {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

/// Percent success per configured pair, detector-major.
pub fn pair_table(rows: &[MatchRow], config: &BenchConfig) -> Vec<PairCell> {
    config
        .pairs()
        .into_iter()
        .map(|(detector, descriptor)| {
            let cell: Vec<_> = rows.iter().filter(|r| r.detector == detector && r.descriptor == descriptor).collect();
            let successes = cell.iter().filter(|r| r.success).count();
            PairCell {
                detector,
                descriptor,
                cases: cell.len(),
                successes,
                percent: percent(successes, cell.len()),
            }
        })
        .collect()
}

pub fn category_table(rows: &[MatchRow], config: &BenchConfig) -> Vec<CategoryCell> {
    let mut out = Vec::new();
    for &descriptor in &config.descriptors {
        for category in Category::ALL {
            let cell: Vec<_> = rows.iter().filter(|r| r.descriptor == descriptor && r.category == category).collect();
            if cell.is_empty() {
                continue;
            }
            let successes = cell.iter().filter(|r| r.success).count();
            let mean = |f: fn(&MatchRow) -> f64| cell.iter().map(|r| f(r)).sum::<f64>() / cell.len() as f64;
            out.push(CategoryCell {
                descriptor,
                category,
                runs: cell.len(),
                successes,
                percent: percent(successes, cell.len()),
                extraction_ms: mean(|r| r.extraction_ms),
                matching_ms: mean(|r| r.matching_ms),
                coarse_ms: mean(|r| r.coarse_ms),
            });
        }
    }
    out
}

fn percent(k: usize, n: usize) -> f64 {
    if n == 0 {
        0.0
    } else {
        100.0 * k as f64 / n as f64
    }
}

pub fn keypoint_checks(rows: &[RepeatabilityRow]) -> Vec<Check> {
    let anchors_off: Vec<_> = rows.iter().filter(|r| r.value == 0.0 && r.r != 1.0).collect();
    let out_of_range = rows.iter().filter(|r| !(0.0..=1.0).contains(&r.r)).count();
    let mut checks = vec![Check::new(
        "repeatability_anchors",
        anchors_off.is_empty() && out_of_range == 0,
        format!("{} anchor rows below 1, {out_of_range} rows outside [0, 1]", anchors_off.len()),
    )];
    let rotation: Vec<_> = rows
        .iter()
        .filter(|r| r.variable == SweepVariable::Rotation && ROTATION_INVARIANT.contains(&r.detector))
        .collect();
    if !rotation.is_empty() {
        let worst = rotation.iter().min_by(|a, b| a.r.total_cmp(&b.r)).expect("non-empty");
        checks.push(Check::new(
            "rotation_invariance",
            worst.r >= ROTATION_MIN_R,
            format!("min r {:.4} ({} on {} at {}°)", worst.r, worst.detector.name(), worst.cloud, worst.value),
        ));
    }
    checks
}

pub fn matching_checks(rows: &[MatchRow], cases: usize, config: &BenchConfig) -> Vec<Check> {
    let pairs = config.pairs().len();
    let typed = rows.iter().all(|r| r.success != r.failure_stage.is_some());
    let mut cells: Vec<_> = rows.iter().map(|r| (&r.case, r.detector, r.descriptor)).collect();
    cells.sort();
    cells.dedup();
    vec![Check::new(
        "grid_completeness",
        rows.len() == cases * pairs && cells.len() == rows.len() && typed,
        format!("{} rows, {} distinct cells, expected {cases} × {pairs}", rows.len(), cells.len()),
    )]
}

/// Monotone staging and the fine-residual bound on every case whose
/// translational perturbation lies in [0.1, 0.5] m.
pub fn pipeline_checks(rows: &[PipelineRow]) -> Vec<Check> {
    let eligible: Vec<_> = rows
        .iter()
        .filter(|r| (0.1 - 1e-9..=0.5 + 1e-9).contains(&r.perturbation_translation))
        .collect();
    let bad: Vec<&str> = eligible
        .iter()
        .filter(|r| match (r.initial_median, r.coarse_median, r.fine_median) {
            (Some(a), Some(b), Some(c)) => !(a > b && b > c && c < FINE_MEDIAN_BOUND),
            _ => true,
        })
        .map(|r| r.case.as_str())
        .collect();
    vec![Check::new(
        "pipeline_staging",
        bad.is_empty(),
        format!("{} of {} cases violate staging: {:?}", bad.len(), eligible.len(), bad),
    )]
}

fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<(), BenchError> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Loads the cases, runs the enabled stages and writes `repeatability.csv`,
/// `matching.csv`, `pipeline.csv`, `timings.csv` and `summary.json` into
/// `config.output_dir`.
pub fn run_bench(config: &BenchConfig) -> Result<BenchSummary, BenchError> {
    config.validate()?;
    let out = &config.output_dir;
    ensure_dir(out)?;
    let raw = config.load_cases()?;
    log::info!("preparing {} cases", raw.len());
    let cases: Vec<PreparedCase> = raw.iter().map(|c| prepare_case(c, config)).collect::<Result<_, _>>()?;
    drop(raw);

    let mut summary = BenchSummary {
        cases: cases.len(),
        sweeps: Vec::new(),
        detection_ms: Vec::new(),
        pairs: Vec::new(),
        categories: Vec::new(),
        checks: Vec::new(),
    };
    let mut timings = Vec::new();

    let mut rep_rows = Vec::new();
    if config.stages.keypoints {
        let clouds: Vec<_> = thin(cases.len(), Some(config.keypoint_clouds))
            .into_iter()
            .map(|i| (cases[i].name.clone(), cases[i].target().clone()))
            .collect();
        let (rows, det): (Vec<RepeatabilityRow>, Vec<DetectionTiming>) = run_keypoint_bench(&clouds, config)?;
        summary.sweeps = aggregate_sweeps(&rows);
        summary.checks.extend(keypoint_checks(&rows));
        for &kind in &config.detectors {
            let t: Vec<f64> = det.iter().filter(|d| d.detector == kind).map(|d| d.median_ms).collect();
            if !t.is_empty() {
                summary.detection_ms.push((kind, t.iter().sum::<f64>() / t.len() as f64));
            }
        }
        timings.extend(det.into_iter().map(|d| TimingRow {
            source: "keypoints".into(),
            case: d.cloud,
            detector: d.detector,
            descriptor: None,
            detection_ms: Some(d.median_ms),
            extraction_ms: None,
            matching_ms: None,
            coarse_ms: None,
            fine_ms: None,
        }));
        rep_rows = rows;
    }
    write_csv(&out.join("repeatability.csv"), &rep_rows)?;

    let mut match_rows = Vec::new();
    if config.stages.matching {
        match_rows = run_matching_bench(&cases, config)?;
        summary.pairs = pair_table(&match_rows, config);
        summary.categories = category_table(&match_rows, config);
        summary.checks.extend(matching_checks(&match_rows, cases.len(), config));
        timings.extend(match_rows.iter().map(|r| TimingRow {
            source: "matching".into(),
            case: r.case.clone(),
            detector: r.detector,
            descriptor: Some(r.descriptor),
            detection_ms: None,
            extraction_ms: Some(r.extraction_ms),
            matching_ms: Some(r.matching_ms),
            coarse_ms: Some(r.coarse_ms),
            fine_ms: None,
        }));
    }
    write_csv(&out.join("matching.csv"), &match_rows)?;

    let mut pipe_rows = Vec::new();
    if config.stages.pipeline {
        let (det, desc) = (config.pipeline_detector, config.pipeline_descriptor);
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(config.workers)
            .build()
            .map_err(|e| BenchError::Config(e.to_string()))?;
        let results: Vec<_> = pool.install(|| {
            cases
                .par_iter()
                .map(|c| {
                    let r = run_full_pipeline(c, det, desc, config);
                    if let Err(e) = &r {
                        log::warn!("{}: {e}", c.name);
                    }
                    r
                })
                .collect()
        });
        for (case, r) in cases.iter().zip(&results) {
            pipe_rows.push(PipelineRow::new(case, det, desc, r));
            if let Ok(r) = r {
                timings.push(TimingRow {
                    source: "pipeline".into(),
                    case: case.name.clone(),
                    detector: det,
                    descriptor: Some(desc),
                    detection_ms: None,
                    extraction_ms: Some(r.extraction_ms),
                    matching_ms: Some(r.matching_ms),
                    coarse_ms: Some(r.coarse_ms),
                    fine_ms: Some(r.fine_ms),
                });
            }
        }
        summary.checks.extend(pipeline_checks(&pipe_rows));
    }
    write_csv(&out.join("pipeline.csv"), &pipe_rows)?;
    write_csv(&out.join("timings.csv"), &timings)?;
    std::fs::write(out.join("summary.json"), serde_json::to_string_pretty(&summary)?)?;
    Ok(summary)
}
