//! Submapping: simulate a laser pass over a synthetic seabed, then register
//! the scan lines through the navigation trajectory into a windowed,
//! voxelized submap anchored at the middle of the pass.
//!
//! cargo run --example submaps

use seareg::scene::{generate_scene, simulate_scan, straight_pass, Category, LaserParams, SceneSpec};
use seareg::submap::{build_submap, SensorRig, SubmapSpec};

fn main() -> anyhow::Result<()> {
    let scene = generate_scene(&SceneSpec::new(Category::SemiStructured, 4))?;
    let traj = straight_pass([0.0, 0.0], 0.4, 6.0, 3.0, 0.5, 1.0, 4);
    let rig = SensorRig::default();
    let lines = simulate_scan(&scene, &traj, &rig, &LaserParams::default(), 4);
    println!("{} scan lines of {} returns", lines.len(), lines[0].points.len());

    let tau = 0.5 * (traj.start() + traj.end());
    for half in [1.5, 2.5] {
        let spec = SubmapSpec {
            half_extent: half,
            ..SubmapSpec::at(tau)
        };
        let submap = build_submap(&lines, &traj, &rig, &spec)?;
        println!("window ±{half} m at t = {tau:.1} s: {} points, resolution {:.3} m", submap.len(), submap.resolution());
    }
    Ok(())
}
