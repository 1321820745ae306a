//! Keypoint detection: run all eight detectors on one submap, then sweep
//! ISS repeatability over rotation and noise.
//!
//! cargo run --release --example keypoints

use nalgebra::Vector3;
use seareg::cloud::estimate_normals;
use seareg::keypoints::{detect, noise_sweep, rotation_sweep, DetectorConfig, DetectorKind};
use seareg::scene::standard_suite;

fn main() -> anyhow::Result<()> {
    let case = standard_suite(1000)[0].generate()?;
    let cloud = estimate_normals(&case.submap(0)?, 0.15, Vector3::zeros());
    let config = DetectorConfig::from_toml(include_str!("../config/detectors.toml"))?;
    println!("{} on {} points", case.name, cloud.len());
    for kind in DetectorKind::ALL {
        let kp = detect(kind, &cloud, &config.params(kind))?;
        println!("  {:<10} {:>5} keypoints  {:>7.1} ms", kind.name(), kp.len(), kp.elapsed_ms);
    }
    let params = config.params(DetectorKind::Iss);
    for r in rotation_sweep(&cloud, DetectorKind::Iss, &params)?.iter().step_by(3) {
        println!("  iss rotation {:>5.0}°  r = {:.3}", r.value, r.r);
    }
    for r in noise_sweep(&cloud, DetectorKind::Iss, &params, 7)?.iter().step_by(2) {
        println!("  iss noise σ {:.3} m  r = {:.3}", r.value, r.r);
    }
    Ok(())
}
