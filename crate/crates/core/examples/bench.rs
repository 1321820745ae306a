//! Benchmark harness on a handful of suite cases: keypoint sweeps, a reduced
//! detector/descriptor grid and the staged ISS+USC pipeline.
//!
//! cargo run --release --example bench [out_dir]

use seareg::bench::{run_bench, BenchConfig, Stages};
use seareg::descriptors::DescriptorKind;
use seareg::keypoints::DetectorKind;

fn main() -> anyhow::Result<()> {
    let out = std::env::args().nth(1).map(Into::into).unwrap_or_else(|| std::env::temp_dir().join("seareg-bench"));
    let config = BenchConfig {
        detectors: vec![DetectorKind::Iss, DetectorKind::Harris3d, DetectorKind::Curvature],
        descriptors: vec![DescriptorKind::Pfh, DescriptorKind::Shot, DescriptorKind::Usc],
        case_limit: Some(3),
        images_per_pass: 0,
        keypoint_clouds: 1,
        repetitions: 1,
        output_dir: out,
        stages: Stages::default(),
        ..Default::default()
    };
    let summary = run_bench(&config)?;
    for cell in &summary.pairs {
        println!("{:<10} {:<6} {:>5.1}% of {}", cell.detector.name(), cell.descriptor.name(), cell.percent, cell.cases);
    }
    for check in &summary.checks {
        println!("{} {}: {}", if check.passed { "pass" } else { "FAIL" }, check.name, check.detail);
    }
    println!("results in {}", config.output_dir.display());
    Ok(())
}
