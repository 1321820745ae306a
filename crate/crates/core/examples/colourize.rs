//! Colourization: fuse the colours of several posed camera images onto a
//! submap, with hidden points removed per image.
//!
//! cargo run --example colourize

use nalgebra::Vector3;
use seareg::cloud::estimate_normals;
use seareg::colour::{colourize_submap, ColourizeParams};
use seareg::scene::{Category, CaseSpec, Crossing, SceneSpec};

fn main() -> anyhow::Result<()> {
    let spec = CaseSpec {
        name: "colour-demo".into(),
        scene: SceneSpec::new(Category::SemiStructured, 9),
        crossing: Crossing {
            images_per_pass: 5,
            ..Default::default()
        },
        perturbation: Default::default(),
        seed: 9,
    };
    let case = spec.generate()?;
    let submap = estimate_normals(&case.submap(0)?, 0.15, Vector3::zeros());
    let images = case.submap_images(0);
    let out = colourize_submap(&submap, &images, &case.camera, &case.rig, &ColourizeParams::default())?;
    let seen = out.coloured.iter().filter(|c| **c).count();
    println!("{} images coloured {seen} of {} points", images.len(), submap.len());
    let colours = out.cloud.colours().expect("colourized");
    let mean = colours.iter().fold([0.0; 3], |a, c| [a[0] + c[0], a[1] + c[1], a[2] + c[2]]);
    println!("mean sRGB {:.3?}", mean.map(|v| v / colours.len() as f64));
    Ok(())
}
