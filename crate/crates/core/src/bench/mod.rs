//! Experiment driver: keypoint repeatability sweeps, the detector ×
//! descriptor matching grid over loop-closure cases, and the staged
//! full-pipeline run, written out as CSV and JSON.

mod keypoint;
mod matching;
mod pipeline;
mod report;

use std::path::{Path, PathBuf};
use std::time::Instant;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::alignment::{CoarseParams, FineParams};
use crate::cloud::{estimate_normals, PointCloud, RigidTransform, Twist};
use crate::colour::{colourize_submap, ColourError, ColourizeParams};
use crate::descriptors::{DescriptorKind, DescriptorParams};
use crate::keypoints::{DetectError, DetectorConfig, DetectorKind};
use crate::scene::{load_case, standard_suite, Category, LoopClosureCase, SceneError};

pub use keypoint::{aggregate_sweeps, run_keypoint_bench, DetectionTiming, RepeatabilityRow, SweepAggregate};
pub use matching::{run_matching_bench, FailureStage, MatchRow, SUCCESS_TRANSLATION};
pub use pipeline::{run_full_pipeline, PipelineError, PipelineResult, PipelineRow, Stage};
pub use report::{
    category_table, keypoint_checks, matching_checks, pair_table, pipeline_checks, run_bench, BenchSummary, CategoryCell, Check,
    PairCell, TimingRow, FINE_MEDIAN_BOUND, ROTATION_INVARIANT, ROTATION_MIN_R,
};

#[derive(Debug, Error)]
pub enum BenchError {
    #[error(transparent)]
    Scene(#[from] SceneError),
    #[error(transparent)]
    Submap(#[from] crate::submap::SubmapError),
    #[error(transparent)]
    Colour(#[from] ColourError),
    #[error(transparent)]
    Detect(#[from] DetectError),
    #[error("writing results: {0}")]
    Io(#[from] std::io::Error),
    #[error("writing results: {0}")]
    Csv(#[from] csv::Error),
    #[error("writing results: {0}")]
    Json(#[from] serde_json::Error),
    #[error("bench config: {0}")]
    Config(String),
}

/// Which experiments to run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Stages {
    pub keypoints: bool,
    pub matching: bool,
    pub pipeline: bool,
}

impl Default for Stages {
    fn default() -> Self {
        Self {
            keypoints: true,
            matching: true,
            pipeline: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BenchConfig {
    pub detectors: Vec<DetectorKind>,
    pub descriptors: Vec<DescriptorKind>,
    /// Directory of saved cases (one subdirectory each); the standard suite
    /// is generated in memory when unset.
    pub case_dir: Option<PathBuf>,
    pub suite_seed: u64,
    /// Evenly spaced subset of this many cases; all when unset.
    pub case_limit: Option<usize>,
    /// Images rendered per pass when generating the suite.
    pub images_per_pass: usize,
    pub output_dir: PathBuf,
    /// Timings are the median over this many runs.
    pub repetitions: usize,
    /// Submaps used for the repeatability sweeps.
    pub keypoint_clouds: usize,
    pub noise_seed: u64,
    /// Normal estimation radius, metres.
    pub normal_radius: f64,
    pub match_k: usize,
    /// Range of the self-consistency residual, metres.
    pub consistency_radius: f64,
    /// Worker threads for case-level parallelism; 0 lets the pool decide.
    /// Timings are cleanest with 1.
    pub workers: usize,
    pub pipeline_detector: DetectorKind,
    pub pipeline_descriptor: DescriptorKind,
    pub stages: Stages,
    pub detector_params: DetectorConfig,
    pub descriptor_params: DescriptorParams,
    pub coarse: CoarseParams,
    pub fine: FineParams,
    pub colourize: ColourizeParams,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            detectors: DetectorKind::ALL.to_vec(),
            descriptors: DescriptorKind::ALL.to_vec(),
            case_dir: None,
            suite_seed: 1000,
            case_limit: None,
            images_per_pass: 4,
            output_dir: PathBuf::from("bench_out"),
            repetitions: 5,
            keypoint_clouds: 5,
            noise_seed: 7,
            normal_radius: 0.15,
            match_k: 1,
            consistency_radius: 0.25,
            workers: 1,
            pipeline_detector: DetectorKind::Iss,
            pipeline_descriptor: DescriptorKind::Usc,
            stages: Stages::default(),
            detector_params: DetectorConfig::default(),
            descriptor_params: DescriptorParams::default(),
            coarse: CoarseParams::default(),
            fine: FineParams::default(),
            colourize: ColourizeParams::default(),
        }
    }
}

impl BenchConfig {
    pub fn from_toml(text: &str) -> Result<Self, BenchError> {
        let cfg: Self = toml::from_str(text).map_err(|e| BenchError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), BenchError> {
        if self.repetitions == 0 {
            return Err(BenchError::Config("repetitions must be at least 1".into()));
        }
        if self.detectors.is_empty() || self.descriptors.is_empty() {
            return Err(BenchError::Config("detector and descriptor lists must be non-empty".into()));
        }
        if !(self.normal_radius > 0.0 && self.consistency_radius > 0.0) {
            return Err(BenchError::Config("radii must be positive".into()));
        }
        Ok(())
    }

    /// Every configured detector/descriptor pair, detector-major.
    pub fn pairs(&self) -> Vec<(DetectorKind, DescriptorKind)> {
        self.detectors
            .iter()
            .flat_map(|&d| self.descriptors.iter().map(move |&e| (d, e)))
            .collect()
    }

    /// Cases from `case_dir` (sorted by directory name) or the generated
    /// suite, thinned to `case_limit`.
    pub fn load_cases(&self) -> Result<Vec<LoopClosureCase>, BenchError> {
        match &self.case_dir {
            Some(dir) => {
                let mut dirs: Vec<PathBuf> = std::fs::read_dir(dir)?
                    .filter_map(|e| e.ok().map(|e| e.path()))
                    .filter(|p| p.join("case.json").exists())
                    .collect();
                dirs.sort();
                let picked = thin(dirs.len(), self.case_limit);
                picked.into_iter().map(|i| Ok(load_case(&dirs[i])?)).collect()
            }
            None => {
                let suite = standard_suite(self.suite_seed);
                thin(suite.len(), self.case_limit)
                    .into_iter()
                    .map(|i| {
                        let mut spec = suite[i].clone();
                        spec.crossing.images_per_pass = self.images_per_pass;
                        Ok(spec.generate()?)
                    })
                    .collect()
            }
        }
    }
}

/// `limit` indices spread evenly over `0..n`.
fn thin(n: usize, limit: Option<usize>) -> Vec<usize> {
    match limit {
        Some(k) if k < n => (0..k).map(|i| i * n / k).collect(),
        _ => (0..n).collect(),
    }
}

/// A case reduced to what the experiments consume: both submaps with
/// normals (and colours when the case has images), plus ground truth.
#[derive(Debug, Clone)]
pub struct PreparedCase {
    pub name: String,
    pub category: Category,
    /// Submap of the first and second pass. Alignment maps the second into
    /// the first.
    pub submaps: [PointCloud; 2],
    pub truth: RigidTransform,
    pub initial: RigidTransform,
    pub perturbation: Twist,
}

impl PreparedCase {
    pub fn source(&self) -> &PointCloud {
        &self.submaps[1]
    }

    pub fn target(&self) -> &PointCloud {
        &self.submaps[0]
    }
}

pub fn prepare_case(case: &LoopClosureCase, config: &BenchConfig) -> Result<PreparedCase, BenchError> {
    let mut submaps = Vec::with_capacity(2);
    for pass in 0..2 {
        let raw = case.submap(pass)?;
        let res = raw.resolution();
        let mut cloud = estimate_normals(&raw, config.normal_radius, Vector3::zeros());
        let images = case.submap_images(pass);
        if !images.is_empty() {
            cloud = colourize_submap(&cloud, &images, &case.camera, &case.rig, &config.colourize)?.cloud;
        }
        submaps.push(cloud.set_resolution(res));
    }
    let [a, b]: [PointCloud; 2] = submaps.try_into().expect("two passes");
    Ok(PreparedCase {
        name: case.name.clone(),
        category: case.category(),
        submaps: [a, b],
        truth: case.truth,
        initial: case.initial_estimate(),
        perturbation: case.perturbation,
    })
}

/// Runs `f` `reps` times; returns the last result and the median wall time
/// in milliseconds.
pub(crate) fn timed<T>(reps: usize, mut f: impl FnMut() -> T) -> (T, f64) {
    let mut times = Vec::with_capacity(reps);
    let mut out = None;
    for _ in 0..reps.max(1) {
        let start = Instant::now();
        out = Some(f());
        times.push(start.elapsed().as_secs_f64() * 1e3);
    }
    times.sort_by(f64::total_cmp);
    let n = times.len();
    let median = if n % 2 == 1 { times[n / 2] } else { 0.5 * (times[n / 2 - 1] + times[n / 2]) };
    (out.expect("at least one run"), median)
}

pub(crate) fn ensure_dir(dir: &Path) -> Result<(), BenchError> {
    std::fs::create_dir_all(dir)?;
    Ok(())
}
