//! Descriptors: describe ISS keypoints of a colourized submap with all six
//! descriptors and store one set in the binary descriptor format.
//!
//! cargo run --release --example descriptors

use std::time::Instant;

use nalgebra::Vector3;
use seareg::cloud::estimate_normals;
use seareg::colour::{colourize_submap, ColourizeParams};
use seareg::descriptors::{describe, read_descriptors, write_descriptors, DescriptorKind, DescriptorParams};
use seareg::keypoints::{detect, DetectorKind, DetectorParams};
use seareg::scene::standard_suite;

fn main() -> anyhow::Result<()> {
    let mut spec = standard_suite(1000)[40].clone();
    spec.crossing.images_per_pass = 4;
    let case = spec.generate()?;
    let submap = estimate_normals(&case.submap(0)?, 0.15, Vector3::zeros());
    let cloud = colourize_submap(&submap, &case.submap_images(0), &case.camera, &case.rig, &ColourizeParams::default())?.cloud;
    let kp = detect(DetectorKind::Iss, &cloud, &DetectorParams::default())?;
    println!("{}: {} ISS keypoints", case.name, kp.len());
    let params = DescriptorParams::default();
    let mut usc = None;
    for kind in DescriptorKind::ALL {
        let start = Instant::now();
        let set = describe(kind, &cloud, &kp, &params)?;
        let empty = set.empty.iter().filter(|e| **e).count();
        println!("  {:<7} dim {:>4}  {} empty rows  {:>7.1} ms", kind.name(), set.dim(), empty, start.elapsed().as_secs_f64() * 1e3);
        if kind == DescriptorKind::Usc {
            usc = Some(set);
        }
    }
    let usc = usc.expect("usc computed");
    let mut bytes = Vec::new();
    write_descriptors(&mut bytes, &usc)?;
    let back = read_descriptors(bytes.as_slice())?;
    println!("binary USC file: {} bytes, {} rows read back", bytes.len(), back.len());
    Ok(())
}
