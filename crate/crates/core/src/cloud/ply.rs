//! PLY point cloud I/O (ASCII and binary little-endian).
//!
//! Reads `x, y, z` (any scalar type), optional `nx, ny, nz` and optional
//! `red, green, blue` (8-bit). Other vertex properties are skipped with a
//! warning. Elements after `vertex` are ignored.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use log::warn;
use nalgebra::Vector3;
use thiserror::Error;

use super::{CloudError, PointCloud, Rgb};

#[derive(Debug, Error)]
pub enum PlyError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed header: {0}")]
    Header(String),
    #[error("unsupported format {0}")]
    Format(String),
    #[error("vertex element lacks property {0}")]
    MissingProperty(&'static str),
    #[error("bad vertex data at vertex {0}")]
    Data(usize),
    #[error(transparent)]
    Cloud(#[from] CloudError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlyFormat {
    Ascii,
    BinaryLittleEndian,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Scalar {
    I8,
    U8,
    I16,
    U16,
    I32,
    U32,
    F32,
    F64,
}

impl Scalar {
    fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "char" | "int8" => Scalar::I8,
            "uchar" | "uint8" => Scalar::U8,
            "short" | "int16" => Scalar::I16,
            "ushort" | "uint16" => Scalar::U16,
            "int" | "int32" => Scalar::I32,
            "uint" | "uint32" => Scalar::U32,
            "float" | "float32" => Scalar::F32,
            "double" | "float64" => Scalar::F64,
            _ => return None,
        })
    }

    fn size(self) -> usize {
        match self {
            Scalar::I8 | Scalar::U8 => 1,
            Scalar::I16 | Scalar::U16 => 2,
            Scalar::I32 | Scalar::U32 | Scalar::F32 => 4,
            Scalar::F64 => 8,
        }
    }

    fn read_le(self, b: &[u8]) -> f64 {
        match self {
            Scalar::I8 => b[0] as i8 as f64,
            Scalar::U8 => b[0] as f64,
            Scalar::I16 => i16::from_le_bytes([b[0], b[1]]) as f64,
            Scalar::U16 => u16::from_le_bytes([b[0], b[1]]) as f64,
            Scalar::I32 => i32::from_le_bytes(b[..4].try_into().unwrap()) as f64,
            Scalar::U32 => u32::from_le_bytes(b[..4].try_into().unwrap()) as f64,
            Scalar::F32 => f32::from_le_bytes(b[..4].try_into().unwrap()) as f64,
            Scalar::F64 => f64::from_le_bytes(b[..8].try_into().unwrap()),
        }
    }
}

struct Header {
    format: PlyFormat,
    vertex_count: usize,
    properties: Vec<(String, Scalar)>,
}

fn read_header<R: BufRead>(r: &mut R) -> Result<Header, PlyError> {
    let mut line = String::new();
    r.read_line(&mut line)?;
    if line.trim() != "ply" {
        return Err(PlyError::Header("missing 'ply' magic".into()));
    }
    let mut format = None;
    let mut vertex_count = None;
    let mut properties = Vec::new();
    let mut in_vertex = false;
    let mut seen_vertex = false;
    loop {
        line.clear();
        if r.read_line(&mut line)? == 0 {
            return Err(PlyError::Header("unexpected end of header".into()));
        }
        let tokens: Vec<&str> = line.split_whitespace().collect();
        match tokens.as_slice() {
            ["end_header"] => break,
            ["comment", ..] | ["obj_info", ..] | [] => {}
            ["format", f, _version] => {
                format = Some(match *f {
                    "ascii" => PlyFormat::Ascii,
                    "binary_little_endian" => PlyFormat::BinaryLittleEndian,
                    other => return Err(PlyError::Format(other.to_string())),
                });
            }
            ["element", name, count] => {
                in_vertex = *name == "vertex";
                if in_vertex {
                    vertex_count = Some(
                        count
                            .parse()
                            .map_err(|_| PlyError::Header(format!("bad vertex count {count}")))?,
                    );
                    seen_vertex = true;
                } else if !seen_vertex {
                    return Err(PlyError::Header(format!("element {name} precedes vertex")));
                }
            }
            ["property", "list", ..] if in_vertex => {
                return Err(PlyError::Header("list properties on vertex are unsupported".into()));
            }
            ["property", ty, name] if in_vertex => {
                let s = Scalar::parse(ty).ok_or_else(|| PlyError::Header(format!("unknown type {ty}")))?;
                properties.push((name.to_string(), s));
            }
            ["property", ..] => {}
            _ => return Err(PlyError::Header(format!("unrecognized line: {}", line.trim()))),
        }
    }
    Ok(Header {
        format: format.ok_or_else(|| PlyError::Header("missing format line".into()))?,
        vertex_count: vertex_count.ok_or_else(|| PlyError::Header("no vertex element".into()))?,
        properties,
    })
}

/// Also returns the per-point alpha channel when one is present.
pub fn read_ply_with_alpha<R: Read>(reader: R) -> Result<(PointCloud, Option<Vec<bool>>), PlyError> {
    let mut r = BufReader::new(reader);
    let header = read_header(&mut r)?;
    let find = |name: &str| header.properties.iter().position(|(n, _)| n == name);
    let xyz = [
        find("x").ok_or(PlyError::MissingProperty("x"))?,
        find("y").ok_or(PlyError::MissingProperty("y"))?,
        find("z").ok_or(PlyError::MissingProperty("z"))?,
    ];
    let nxyz = match (find("nx"), find("ny"), find("nz")) {
        (Some(a), Some(b), Some(c)) => Some([a, b, c]),
        _ => None,
    };
    let rgb = match (find("red"), find("green"), find("blue")) {
        (Some(a), Some(b), Some(c)) => Some([a, b, c]),
        _ => None,
    };
    let alpha = find("alpha");
    let known = ["x", "y", "z", "nx", "ny", "nz", "red", "green", "blue", "alpha"];
    for (name, _) in &header.properties {
        if !known.contains(&name.as_str()) {
            warn!("skipping unknown PLY vertex property '{name}'");
        }
    }

    let n = header.vertex_count;
    let mut values = vec![0.0f64; header.properties.len()];
    let mut points = Vec::with_capacity(n);
    let mut normals = nxyz.map(|_| Vec::with_capacity(n));
    let mut colours = rgb.map(|_| Vec::with_capacity(n));
    let mut alphas = alpha.map(|_| Vec::with_capacity(n));
    let record: usize = header.properties.iter().map(|(_, s)| s.size()).sum();
    let mut buf = vec![0u8; record];
    let mut line = String::new();

    for v in 0..n {
        match header.format {
            PlyFormat::Ascii => {
                line.clear();
                if r.read_line(&mut line)? == 0 {
                    return Err(PlyError::Data(v));
                }
                let mut it = line.split_whitespace();
                for slot in values.iter_mut() {
                    *slot = it
                        .next()
                        .and_then(|t| t.parse().ok())
                        .ok_or(PlyError::Data(v))?;
                }
            }
            PlyFormat::BinaryLittleEndian => {
                r.read_exact(&mut buf).map_err(|_| PlyError::Data(v))?;
                let mut off = 0;
                for (slot, (_, s)) in values.iter_mut().zip(&header.properties) {
                    *slot = s.read_le(&buf[off..]);
                    off += s.size();
                }
            }
        }
        points.push(Vector3::new(values[xyz[0]], values[xyz[1]], values[xyz[2]]));
        if let (Some(ns), Some(idx)) = (normals.as_mut(), nxyz) {
            let n = Vector3::new(values[idx[0]], values[idx[1]], values[idx[2]]);
            // f32 storage loses precision; renormalize non-zero normals.
            let norm = n.norm();
            ns.push(if norm > 0.5 { n / norm } else { super::INVALID_NORMAL });
        }
        if let (Some(cs), Some(idx)) = (colours.as_mut(), rgb) {
            let c: Rgb = [
                values[idx[0]] / 255.0,
                values[idx[1]] / 255.0,
                values[idx[2]] / 255.0,
            ];
            cs.push(c.map(|x| x.clamp(0.0, 1.0)));
        }
        if let (Some(a), Some(idx)) = (alphas.as_mut(), alpha) {
            a.push(values[idx] > 0.0);
        }
    }
    let mut cloud = PointCloud::new(points)?;
    if let Some(ns) = normals {
        cloud = cloud.with_normals(ns)?;
    }
    if let Some(cs) = colours {
        cloud = cloud.with_colours(cs)?;
    }
    Ok((cloud, alphas))
}

pub fn read_ply<R: Read>(reader: R) -> Result<PointCloud, PlyError> {
    read_ply_with_alpha(reader).map(|(c, _)| c)
}

pub fn load_ply(path: impl AsRef<Path>) -> Result<PointCloud, PlyError> {
    read_ply(File::open(path)?)
}

fn colour_byte(c: f64) -> u8 {
    (c.clamp(0.0, 1.0) * 255.0).round() as u8
}

/// Writes `cloud`. With `alpha`, an `alpha` channel is emitted (0 where false, 255 where true).
pub fn write_ply<W: Write>(
    writer: W,
    cloud: &PointCloud,
    format: PlyFormat,
    alpha: Option<&[bool]>,
) -> Result<(), PlyError> {
    let mut w = BufWriter::new(writer);
    writeln!(w, "ply")?;
    match format {
        PlyFormat::Ascii => writeln!(w, "format ascii 1.0")?,
        PlyFormat::BinaryLittleEndian => writeln!(w, "format binary_little_endian 1.0")?,
    }
    writeln!(w, "element vertex {}", cloud.len())?;
    for p in ["x", "y", "z"] {
        writeln!(w, "property float {p}")?;
    }
    if cloud.has_normals() {
        for p in ["nx", "ny", "nz"] {
            writeln!(w, "property float {p}")?;
        }
    }
    let with_colour = cloud.has_colours() || alpha.is_some();
    if with_colour {
        for p in ["red", "green", "blue"] {
            writeln!(w, "property uchar {p}")?;
        }
    }
    if alpha.is_some() {
        writeln!(w, "property uchar alpha")?;
    }
    writeln!(w, "end_header")?;

    for i in 0..cloud.len() {
        let mut floats: Vec<f32> = cloud.points()[i].iter().map(|&v| v as f32).collect();
        if let Some(ns) = cloud.normals() {
            floats.extend(ns[i].iter().map(|&v| v as f32));
        }
        let mut bytes: Vec<u8> = Vec::new();
        if with_colour {
            let c = cloud.colours().map_or([0.0; 3], |cs| cs[i]);
            bytes.extend(c.iter().map(|&v| colour_byte(v)));
        }
        if let Some(a) = alpha {
            bytes.push(if a[i] { 255 } else { 0 });
        }
        match format {
            PlyFormat::Ascii => {
                let mut fields: Vec<String> = floats.iter().map(|v| v.to_string()).collect();
                fields.extend(bytes.iter().map(|b| b.to_string()));
                writeln!(w, "{}", fields.join(" "))?;
            }
            PlyFormat::BinaryLittleEndian => {
                for v in floats {
                    w.write_all(&v.to_le_bytes())?;
                }
                w.write_all(&bytes)?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

pub fn save_ply(path: impl AsRef<Path>, cloud: &PointCloud, format: PlyFormat) -> Result<(), PlyError> {
    write_ply(File::create(path)?, cloud, format, None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sample_cloud() -> PointCloud {
        PointCloud::new(vec![Vector3::new(0.5, -1.25, 3.0), Vector3::new(1.0, 2.0, -0.125)])
            .unwrap()
            .with_normals(vec![Vector3::z(), Vector3::x()])
            .unwrap()
            .with_colours(vec![[1.0, 0.0, 0.0], [0.2, 0.4, 0.6]])
            .unwrap()
    }

    #[test]
    fn ascii_and_binary_round_trip() {
        for format in [PlyFormat::Ascii, PlyFormat::BinaryLittleEndian] {
            let mut buf = Vec::new();
            write_ply(&mut buf, &sample_cloud(), format, None).unwrap();
            let back = read_ply(buf.as_slice()).unwrap();
            assert_eq!(back.points(), sample_cloud().points());
            assert_eq!(back.normals(), sample_cloud().normals());
            let c = back.colours().unwrap();
            assert_eq!(c[0], [1.0, 0.0, 0.0]);
            assert!((c[1][1] - 102.0 / 255.0).abs() < 1e-12);
        }
    }

    #[test]
    fn alpha_channel_round_trip() {
        let mut buf = Vec::new();
        write_ply(&mut buf, &sample_cloud(), PlyFormat::Ascii, Some(&[true, false])).unwrap();
        let (_, alpha) = read_ply_with_alpha(buf.as_slice()).unwrap();
        assert_eq!(alpha, Some(vec![true, false]));
    }

    #[test]
    fn unknown_properties_are_skipped() {
        let text = "ply\nformat ascii 1.0\ncomment test\nelement vertex 2\nproperty double x\n\
                    property float intensity\nproperty double y\nproperty double z\n\
                    element face 0\nproperty list uchar int vertex_indices\nend_header\n\
                    1 7 2 3\n4 8 5 6\n";
        let c = read_ply(text.as_bytes()).unwrap();
        assert_eq!(c.points()[1], Vector3::new(4.0, 5.0, 6.0));
        assert!(!c.has_normals() && !c.has_colours());
    }

    #[test]
    fn rejects_missing_coordinates() {
        let text = "ply\nformat ascii 1.0\nelement vertex 1\nproperty float x\nend_header\n1\n";
        assert!(matches!(read_ply(text.as_bytes()), Err(PlyError::MissingProperty("y"))));
    }

    proptest! {
        #[test]
        fn binary_round_trip_is_f32_exact(coords in proptest::collection::vec(-1e3f32..1e3, 3..60)) {
            let pts: Vec<_> = coords.chunks_exact(3)
                .map(|c| Vector3::new(c[0] as f64, c[1] as f64, c[2] as f64)).collect();
            let cloud = PointCloud::new(pts).unwrap();
            let mut buf = Vec::new();
            write_ply(&mut buf, &cloud, PlyFormat::BinaryLittleEndian, None).unwrap();
            let back = read_ply(buf.as_slice()).unwrap();
            prop_assert_eq!(back.points(), cloud.points());
        }
    }
}
