//! Loop-closure registration with ISS keypoints and USC descriptors: match,
//! align coarsely with consensus sampling, refine with point-to-plane ICP and
//! report the self-consistency residual after each stage.
//!
//! cargo run --release --example loop_closure

use nalgebra::Vector3;
use seareg::alignment::{coarse_align, fine_align, match_descriptors, self_consistency, CoarseParams, FineParams};
use seareg::cloud::estimate_normals;
use seareg::descriptors::{describe, DescriptorKind, DescriptorParams};
use seareg::keypoints::{detect, DetectorKind, DetectorParams};
use seareg::scene::standard_suite;

fn main() -> anyhow::Result<()> {
    let case = standard_suite(1000)[70].generate()?;
    let tgt = estimate_normals(&case.submap(0)?, 0.15, Vector3::zeros());
    let src = estimate_normals(&case.submap(1)?, 0.15, Vector3::zeros());
    println!("{}: drift |phi| {:.2}°, |rho| {:.3} m", case.name, case.perturbation.rotation.norm().to_degrees(), case.perturbation.translation.norm());

    let kp_src = detect(DetectorKind::Iss, &src, &DetectorParams::default())?;
    let kp_tgt = detect(DetectorKind::Iss, &tgt, &DetectorParams::default())?;
    let d_src = describe(DescriptorKind::Usc, &src, &kp_src, &DescriptorParams::default())?;
    let d_tgt = describe(DescriptorKind::Usc, &tgt, &kp_tgt, &DescriptorParams::default())?;
    let corr = match_descriptors(&d_src, &d_tgt, 1)?;
    let p_src: Vec<_> = d_src.keypoints.iter().map(|&i| src.points()[i]).collect();
    let p_tgt: Vec<_> = d_tgt.keypoints.iter().map(|&i| tgt.points()[i]).collect();

    let mut coarse = coarse_align(&corr, &p_src, &p_tgt, &CoarseParams::default())?;
    let mut fine = fine_align(&src, &tgt, &coarse.transform, &FineParams::default())?;
    println!("{} correspondences, {} inliers", corr.len(), coarse.inliers);

    let initial = case.initial_estimate();
    for (stage, t) in [("initial", &initial), ("coarse", &coarse.transform), ("fine", &fine.transform)] {
        let r = self_consistency(&src, &tgt, t, 0.25)?;
        println!("  {stage:<8} median residual {:.4} m  p95 {:.4} m", r.median, r.p95);
    }
    let ec = coarse.score(&case.truth)?;
    let ef = fine.score(&case.truth)?;
    println!("  error after coarse: {:.3}° / {:.4} m", ec.rotation.norm().to_degrees(), ec.translation.norm());
    println!("  error after fine:   {:.3}° / {:.4} m", ef.rotation.norm().to_degrees(), ef.translation.norm());
    Ok(())
}
