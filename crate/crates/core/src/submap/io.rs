//! Trajectory CSV and scan-line files.
//!
//! * Trajectory / pose sidecar CSV: header `t,x,y,z,qw,qx,qy,qz`, world-from-body.
//! * Scan-line binary: repeated little-endian records `t: f64, n: u32, n × (f32, f32, f32)`.
//! * Scan-line CSV (debug form): header `t,x,y,z`, one row per point, rows of
//!   a line share `t`.

use std::fs::File;
use std::io::{BufReader, BufWriter, ErrorKind, Read, Write};
use std::path::Path;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{ScanLine, SubmapError, Trajectory};
use crate::cloud::RigidTransform;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("truncated scan-line record {0}")]
    Truncated(usize),
    #[error(transparent)]
    Trajectory(#[from] SubmapError),
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct PoseRow {
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub qw: f64,
    pub qx: f64,
    pub qy: f64,
    pub qz: f64,
}

impl PoseRow {
    pub fn from_pose(t: f64, pose: &RigidTransform) -> Self {
        let [qw, qx, qy, qz] = pose.quaternion();
        let p = pose.translation();
        PoseRow {
            t,
            x: p.x,
            y: p.y,
            z: p.z,
            qw,
            qx,
            qy,
            qz,
        }
    }

    pub fn pose(&self) -> RigidTransform {
        RigidTransform::from_quaternion([self.qw, self.qx, self.qy, self.qz], Vector3::new(self.x, self.y, self.z))
    }
}

pub fn read_poses<R: Read>(reader: R) -> Result<Vec<(f64, RigidTransform)>, IoError> {
    let mut rdr = csv::Reader::from_reader(reader);
    let mut out = Vec::new();
    for row in rdr.deserialize() {
        let row: PoseRow = row?;
        out.push((row.t, row.pose()));
    }
    Ok(out)
}

pub fn write_poses<W: Write>(writer: W, poses: &[(f64, RigidTransform)]) -> Result<(), IoError> {
    let mut wtr = csv::Writer::from_writer(writer);
    for (t, p) in poses {
        wtr.serialize(PoseRow::from_pose(*t, p))?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn load_trajectory(path: impl AsRef<Path>) -> Result<Trajectory, IoError> {
    Ok(Trajectory::new(read_poses(File::open(path)?)?)?)
}

pub fn save_trajectory(path: impl AsRef<Path>, traj: &Trajectory) -> Result<(), IoError> {
    write_poses(File::create(path)?, traj.samples())
}

pub fn write_scan_lines<W: Write>(writer: W, lines: &[ScanLine]) -> Result<(), IoError> {
    let mut w = BufWriter::new(writer);
    for line in lines {
        w.write_all(&line.timestamp.to_le_bytes())?;
        w.write_all(&(line.points.len() as u32).to_le_bytes())?;
        for p in &line.points {
            for v in p.iter() {
                w.write_all(&(*v as f32).to_le_bytes())?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_scan_lines<R: Read>(reader: R) -> Result<Vec<ScanLine>, IoError> {
    let mut r = BufReader::new(reader);
    let mut lines = Vec::new();
    loop {
        let mut t = [0u8; 8];
        match r.read_exact(&mut t) {
            Ok(()) => {}
            Err(e) if e.kind() == ErrorKind::UnexpectedEof => break,
            Err(e) => return Err(e.into()),
        }
        let record = lines.len();
        let mut n = [0u8; 4];
        r.read_exact(&mut n).map_err(|_| IoError::Truncated(record))?;
        let n = u32::from_le_bytes(n) as usize;
        let mut buf = vec![0u8; n * 12];
        r.read_exact(&mut buf).map_err(|_| IoError::Truncated(record))?;
        let points = buf
            .chunks_exact(12)
            .map(|c| {
                let f = |o: usize| f32::from_le_bytes(c[o..o + 4].try_into().unwrap()) as f64;
                Vector3::new(f(0), f(4), f(8))
            })
            .collect();
        lines.push(ScanLine {
            timestamp: f64::from_le_bytes(t),
            points,
        });
    }
    Ok(lines)
}

#[derive(Debug, Serialize, Deserialize)]
struct LinePointRow {
    t: f64,
    x: f64,
    y: f64,
    z: f64,
}

pub fn write_scan_lines_csv<W: Write>(writer: W, lines: &[ScanLine]) -> Result<(), IoError> {
    let mut wtr = csv::Writer::from_writer(writer);
    for line in lines {
        for p in &line.points {
            wtr.serialize(LinePointRow {
                t: line.timestamp,
                x: p.x,
                y: p.y,
                z: p.z,
            })?;
        }
    }
    wtr.flush()?;
    Ok(())
}

/// Consecutive rows with equal `t` form one line. Empty lines cannot be represented.
pub fn read_scan_lines_csv<R: Read>(reader: R) -> Result<Vec<ScanLine>, IoError> {
    let mut rdr = csv::Reader::from_reader(reader);
    let mut lines: Vec<ScanLine> = Vec::new();
    for row in rdr.deserialize() {
        let row: LinePointRow = row?;
        let p = Vector3::new(row.x, row.y, row.z);
        match lines.last_mut() {
            Some(l) if l.timestamp == row.t => l.points.push(p),
            _ => lines.push(ScanLine {
                timestamp: row.t,
                points: vec![p],
            }),
        }
    }
    Ok(lines)
}

pub fn load_scan_lines(path: impl AsRef<Path>) -> Result<Vec<ScanLine>, IoError> {
    read_scan_lines(File::open(path)?)
}

pub fn save_scan_lines(path: impl AsRef<Path>, lines: &[ScanLine]) -> Result<(), IoError> {
    write_scan_lines(File::create(path)?, lines)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lines() -> Vec<ScanLine> {
        vec![
            ScanLine {
                timestamp: 0.125,
                points: vec![Vector3::new(1.0, 2.0, 3.0), Vector3::new(-0.5, 0.25, 8.0)],
            },
            ScanLine {
                timestamp: 0.25,
                points: vec![],
            },
            ScanLine {
                timestamp: 0.375,
                points: vec![Vector3::new(0.0, -1.0, 2.5)],
            },
        ]
    }

    #[test]
    fn binary_scan_lines_round_trip() {
        let mut buf = Vec::new();
        write_scan_lines(&mut buf, &lines()).unwrap();
        assert_eq!(buf.len(), 3 * 12 + 3 * 12);
        assert_eq!(read_scan_lines(buf.as_slice()).unwrap(), lines());
        assert!(matches!(
            read_scan_lines(&buf[..buf.len() - 1]),
            Err(IoError::Truncated(2))
        ));
    }

    #[test]
    fn csv_scan_lines_round_trip() {
        let mut buf = Vec::new();
        write_scan_lines_csv(&mut buf, &lines()).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("t,x,y,z\n"));
        let back = read_scan_lines_csv(buf.as_slice()).unwrap();
        let non_empty: Vec<_> = lines().into_iter().filter(|l| !l.points.is_empty()).collect();
        assert_eq!(back, non_empty);
    }

    #[test]
    fn trajectory_csv_round_trip() {
        let poses = vec![
            (0.0, RigidTransform::identity()),
            (
                1.5,
                RigidTransform::rotation_z(0.4).compose(&RigidTransform::from_translation(Vector3::new(1.0, 2.0, 3.0))),
            ),
        ];
        let mut buf = Vec::new();
        write_poses(&mut buf, &poses).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("t,x,y,z,qw,qx,qy,qz\n"));
        let back = read_poses(buf.as_slice()).unwrap();
        for ((ta, a), (tb, b)) in poses.iter().zip(&back) {
            assert_eq!(ta, tb);
            assert!((a.to_matrix() - b.to_matrix()).amax() < 1e-12);
        }
    }
}
