//! Point cloud basics: build a cloud, estimate normals, downsample, move it
//! with an se(3) exponential and round-trip it through PLY.
//!
//! cargo run --example point_clouds

use nalgebra::Vector3;
use seareg::cloud::ply::{load_ply, save_ply, PlyFormat};
use seareg::cloud::{estimate_normals, voxel_downsample, PointCloud, RigidTransform, Twist};

fn main() -> anyhow::Result<()> {
    // A wavy 2 m × 2 m patch sampled every centimetre, three metres below the origin.
    let mut pts = Vec::new();
    for i in 0..200 {
        for j in 0..200 {
            let (x, y) = (-1.0 + 0.01 * i as f64, -1.0 + 0.01 * j as f64);
            pts.push(Vector3::new(x, y, -3.0 + 0.1 * (2.0 * x).sin() * (3.0 * y).cos()));
        }
    }
    let dense = PointCloud::new(pts)?;
    let sparse = voxel_downsample(&dense, 0.05);
    let cloud = estimate_normals(&sparse, 0.15, Vector3::zeros());
    println!("{} points -> {} after 5 cm voxels, resolution {:.4} m", dense.len(), cloud.len(), cloud.resolution());

    let motion = RigidTransform::exp(&Twist::new(Vector3::new(0.0, 0.0, 0.3), Vector3::new(0.5, -0.2, 0.0)));
    let moved = cloud.transformed(&motion);
    let back = motion.log()?;
    println!("twist recovered from the transform: phi {:?}, rho {:?}", back.rotation.as_slice(), back.translation.as_slice());

    let dir = tempfile_dir()?;
    let path = dir.join("patch.ply");
    save_ply(&path, &moved, PlyFormat::BinaryLittleEndian)?;
    let loaded = load_ply(&path)?;
    println!("wrote and re-read {} points with normals: {}", loaded.len(), loaded.has_normals());
    Ok(())
}

fn tempfile_dir() -> std::io::Result<std::path::PathBuf> {
    let dir = std::env::temp_dir().join("seareg-point-clouds");
    std::fs::create_dir_all(&dir)?;
    Ok(dir)
}
