use std::fs::File;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use nalgebra::Vector3;
use serde::Serialize;

use seareg::alignment::{
    coarse_align, fine_align, match_descriptors, AlignmentReport, CoarseParams, FineParams, ResidualStats,
};
use seareg::bench::{run_bench, BenchConfig};
use seareg::cloud::ply::{load_ply, save_ply, PlyFormat};
use seareg::cloud::{estimate_normals, PointCloud, RigidTransform, Twist};
use seareg::descriptors::{describe, DescriptorKind, DescriptorParams};
use seareg::keypoints::{detect, DetectorConfig, DetectorKind};
use seareg::scene::{save_case, standard_suite, CaseSpec};

#[derive(Parser)]
#[command(name = "seareg", version, about = "Subsea submap registration toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Detect keypoints and write `index,x,y,z,saliency` rows.
    Detect {
        #[arg(long)]
        kind: String,
        #[arg(long)]
        cloud: PathBuf,
        /// Per-detector parameter tables.
        #[arg(long)]
        params: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Normal radius used when the cloud has none, metres.
        #[arg(long, default_value_t = 0.15)]
        normal_radius: f64,
    },
    /// Register `src` onto `tgt` and write a JSON report.
    Align {
        #[arg(long)]
        src: PathBuf,
        #[arg(long)]
        tgt: PathBuf,
        #[arg(long, default_value = "iss")]
        detector: String,
        #[arg(long, default_value = "usc")]
        descriptor: String,
        #[arg(long)]
        report: PathBuf,
        /// Known src-to-tgt transform to score against: a row-major 4×4 JSON
        /// array, or a case's `truth.json`.
        #[arg(long)]
        reference: Option<PathBuf>,
        #[arg(long)]
        params: Option<PathBuf>,
        #[arg(long, default_value_t = 0.15)]
        normal_radius: f64,
    },
    /// Generate a loop-closure case directory, or the standard suite.
    Gen {
        /// Case description (name, scene, crossing, perturbation, seed).
        #[arg(long, conflicts_with = "suite")]
        spec: Option<PathBuf>,
        /// Write the standard suite generated from this seed instead.
        #[arg(long)]
        suite: Option<u64>,
        #[arg(long)]
        out: PathBuf,
        /// Also write both submaps as PLY.
        #[arg(long)]
        ply: bool,
    },
    /// Run the benchmark; exits nonzero when a check fails.
    Bench {
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Detect {
            kind,
            cloud,
            params,
            out,
            normal_radius,
        } => cmd_detect(&kind, &cloud, params.as_deref(), &out, normal_radius),
        Command::Align {
            src,
            tgt,
            detector,
            descriptor,
            report,
            reference,
            params,
            normal_radius,
        } => cmd_align(&src, &tgt, &detector, &descriptor, &report, reference.as_deref(), params.as_deref(), normal_radius),
        Command::Gen { spec, suite, out, ply } => cmd_gen(spec.as_deref(), suite, &out, ply),
        Command::Bench { config } => return cmd_bench(config.as_deref()),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn load_cloud(path: &Path, normal_radius: f64) -> Result<PointCloud> {
    let cloud = load_ply(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(if cloud.has_normals() {
        cloud
    } else {
        estimate_normals(&cloud, normal_radius, Vector3::zeros())
    })
}

fn detector_config(path: Option<&Path>) -> Result<DetectorConfig> {
    match path {
        Some(p) => Ok(DetectorConfig::from_toml(&std::fs::read_to_string(p)?).with_context(|| format!("parsing {}", p.display()))?),
        None => Ok(DetectorConfig::default()),
    }
}

fn cmd_detect(kind: &str, cloud: &Path, params: Option<&Path>, out: &Path, normal_radius: f64) -> Result<()> {
    let kind: DetectorKind = kind.parse()?;
    let cloud = load_cloud(cloud, normal_radius)?;
    let kp = detect(kind, &cloud, &detector_config(params)?.params(kind))?;
    kp.write_csv(File::create(out)?)?;
    log::info!("{} keypoints in {:.1} ms", kp.len(), kp.elapsed_ms);
    Ok(())
}

#[derive(Serialize)]
struct AlignOutput {
    detector: DetectorKind,
    descriptor: DescriptorKind,
    transform: RigidTransform,
    source_keypoints: usize,
    target_keypoints: usize,
    correspondences: usize,
    inliers: usize,
    recall: f64,
    coarse_error: Option<Twist>,
    fine_error: Option<Twist>,
    residuals: Option<ResidualStats>,
    coarse: AlignmentReport,
    fine: AlignmentReport,
    timings_ms: Timings,
}

#[derive(Serialize)]
struct Timings {
    extraction: f64,
    matching: f64,
    coarse: f64,
    fine: f64,
}

fn read_reference(path: &Path) -> Result<RigidTransform> {
    let value: serde_json::Value = serde_json::from_reader(File::open(path)?)?;
    let t = match value.get("t_z2z1") {
        Some(inner) => serde_json::from_value(inner.clone())?,
        None => serde_json::from_value(value)?,
    };
    Ok(t)
}

#[allow(clippy::too_many_arguments)]
fn cmd_align(
    src: &Path,
    tgt: &Path,
    detector: &str,
    descriptor: &str,
    report: &Path,
    reference: Option<&Path>,
    params: Option<&Path>,
    normal_radius: f64,
) -> Result<()> {
    let (detector, descriptor): (DetectorKind, DescriptorKind) = (detector.parse()?, descriptor.parse()?);
    let src = load_cloud(src, normal_radius)?;
    let tgt = load_cloud(tgt, normal_radius)?;
    let reference: Option<RigidTransform> = match reference {
        Some(p) => Some(read_reference(p).with_context(|| format!("parsing {}", p.display()))?),
        None => None,
    };
    let dparams = detector_config(params)?.params(detector);
    let desc_params = DescriptorParams::default();

    let t = Instant::now();
    let src_kp = detect(detector, &src, &dparams)?;
    let tgt_kp = detect(detector, &tgt, &dparams)?;
    let src_d = describe(descriptor, &src, &src_kp, &desc_params)?;
    let tgt_d = describe(descriptor, &tgt, &tgt_kp, &desc_params)?;
    let extraction = t.elapsed().as_secs_f64() * 1e3;

    let t = Instant::now();
    let corr = match_descriptors(&src_d, &tgt_d, 1)?;
    let matching = t.elapsed().as_secs_f64() * 1e3;

    let t = Instant::now();
    let src_pts: Vec<_> = src_d.keypoints.iter().map(|&i| src.points()[i]).collect();
    let tgt_pts: Vec<_> = tgt_d.keypoints.iter().map(|&i| tgt.points()[i]).collect();
    let mut coarse = coarse_align(&corr, &src_pts, &tgt_pts, &CoarseParams::default())?;
    let coarse_ms = t.elapsed().as_secs_f64() * 1e3;

    let t = Instant::now();
    let mut fine = fine_align(&src, &tgt, &coarse.transform, &FineParams::default())?;
    let fine_ms = t.elapsed().as_secs_f64() * 1e3;

    let (mut coarse_error, mut fine_error) = (None, None);
    if let Some(r) = &reference {
        coarse_error = Some(coarse.score(r)?);
        fine_error = Some(fine.score(r)?);
        log::info!("fine error |phi| {:.3e}, |rho| {:.3e}", fine_error.unwrap().rotation.norm(), fine_error.unwrap().translation.norm());
    }
    let out = AlignOutput {
        detector,
        descriptor,
        transform: fine.transform,
        source_keypoints: src_kp.len(),
        target_keypoints: tgt_kp.len(),
        correspondences: corr.len(),
        inliers: coarse.inliers,
        recall: coarse.recall,
        coarse_error,
        fine_error,
        residuals: fine.consistency,
        coarse,
        fine,
        timings_ms: Timings {
            extraction,
            matching,
            coarse: coarse_ms,
            fine: fine_ms,
        },
    };
    std::fs::write(report, serde_json::to_string_pretty(&out)?)?;
    Ok(())
}

fn cmd_gen(spec: Option<&Path>, suite: Option<u64>, out: &Path, ply: bool) -> Result<()> {
    let specs: Vec<(PathBuf, CaseSpec)> = match (spec, suite) {
        (Some(p), None) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            vec![(out.to_path_buf(), toml::from_str(&text).with_context(|| format!("parsing {}", p.display()))?)]
        }
        (None, Some(seed)) => standard_suite(seed).into_iter().map(|s| (out.join(&s.name), s)).collect(),
        _ => bail!("pass either --spec or --suite"),
    };
    for (dir, spec) in specs {
        let case = spec.generate()?;
        save_case(&dir, &case)?;
        if ply {
            for pass in 0..2 {
                save_ply(dir.join(format!("submap_{}.ply", pass + 1)), &case.submap(pass)?, PlyFormat::BinaryLittleEndian)?;
            }
        }
        log::info!("wrote {}", dir.display());
    }
    Ok(())
}

fn cmd_bench(config: Option<&Path>) -> ExitCode {
    let config = match config {
        Some(p) => std::fs::read_to_string(p)
            .map_err(anyhow::Error::from)
            .and_then(|t| BenchConfig::from_toml(&t).map_err(anyhow::Error::from)),
        None => Ok(BenchConfig::default()),
    };
    let summary = match config.and_then(|c| run_bench(&c).map_err(anyhow::Error::from)) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(2);
        }
    };
    for check in &summary.checks {
        println!("{} {}: {}", if check.passed { "PASS" } else { "FAIL" }, check.name, check.detail);
    }
    if summary.passed() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
