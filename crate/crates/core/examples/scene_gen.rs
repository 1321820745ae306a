//! Synthetic data: generate one loop-closure case per scene category and
//! write the first to disk in the case directory layout.
//!
//! cargo run --release --example scene_gen [out_dir]

use seareg::scene::{save_case, standard_suite, Category, CATEGORY_COUNTS};

fn main() -> anyhow::Result<()> {
    let suite = standard_suite(1000);
    println!("standard suite: {} cases {:?}", suite.len(), CATEGORY_COUNTS.map(|(c, n)| (c.name(), n)));
    for category in Category::ALL {
        let spec = suite.iter().find(|s| s.scene.category == category).expect("every category present");
        let case = spec.generate()?;
        let (a, b) = (case.submap(0)?, case.submap(1)?);
        println!(
            "  {:<18} {} + {} points, drift {:.2}° / {:.3} m",
            case.name,
            a.len(),
            b.len(),
            case.perturbation.rotation.norm().to_degrees(),
            case.perturbation.translation.norm()
        );
    }
    let out = std::env::args().nth(1).map(Into::into).unwrap_or_else(|| std::env::temp_dir().join("seareg-case"));
    let mut spec = suite[0].clone();
    spec.crossing.images_per_pass = 3;
    save_case(&out, &spec.generate()?)?;
    println!("wrote {}", out.display());
    Ok(())
}
