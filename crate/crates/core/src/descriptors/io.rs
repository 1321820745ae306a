//! Descriptor files.
//!
//! Binary layout, little-endian. Header: magic `SRDS`, `u8` kind code,
//! `u32` dim, `u32` row count, `count × u32` keypoint indices and
//! `count × u8` empty flags. Body: the row-major `count × dim` matrix of
//! `f32`.

use std::io::{self, BufReader, BufWriter, Read, Write};

use super::{DescriptorKind, DescriptorSet};

const MAGIC: &[u8; 4] = b"SRDS";

fn bad(msg: &str) -> io::Error {
    io::Error::new(io::ErrorKind::InvalidData, msg.to_string())
}

pub fn write_descriptors<W: Write>(writer: W, set: &DescriptorSet) -> io::Result<()> {
    let mut w = BufWriter::new(writer);
    w.write_all(MAGIC)?;
    w.write_all(&[set.kind.code()])?;
    w.write_all(&(set.dim() as u32).to_le_bytes())?;
    w.write_all(&(set.len() as u32).to_le_bytes())?;
    for &k in &set.keypoints {
        w.write_all(&(k as u32).to_le_bytes())?;
    }
    w.write_all(&set.empty.iter().map(|&e| e as u8).collect::<Vec<_>>())?;
    for v in &set.data {
        w.write_all(&(*v as f32).to_le_bytes())?;
    }
    w.flush()
}

pub fn read_descriptors<R: Read>(reader: R) -> io::Result<DescriptorSet> {
    let mut r = BufReader::new(reader);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(bad("not a descriptor file"));
    }
    let mut code = [0u8; 1];
    r.read_exact(&mut code)?;
    let kind = DescriptorKind::from_code(code[0]).ok_or_else(|| bad("unknown descriptor kind"))?;
    let mut word = [0u8; 4];
    r.read_exact(&mut word)?;
    let dim = u32::from_le_bytes(word) as usize;
    if dim != kind.dim() {
        return Err(bad("dimension does not match kind"));
    }
    r.read_exact(&mut word)?;
    let count = u32::from_le_bytes(word) as usize;
    let mut keypoints = Vec::with_capacity(count);
    for _ in 0..count {
        r.read_exact(&mut word)?;
        keypoints.push(u32::from_le_bytes(word) as usize);
    }
    let mut flags = vec![0u8; count];
    r.read_exact(&mut flags)?;
    let empty = flags.iter().map(|&f| f != 0).collect();
    let mut body = vec![0u8; count * dim * 4];
    r.read_exact(&mut body)?;
    let data = body.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64).collect();
    DescriptorSet::new(kind, keypoints, data, empty).map_err(|e| bad(&e.to_string()))
}

/// Debug export: `keypoint,empty,d0,d1,…`.
pub fn write_descriptors_csv<W: Write>(writer: W, set: &DescriptorSet) -> Result<(), csv::Error> {
    let mut wtr = csv::Writer::from_writer(writer);
    let mut header = vec!["keypoint".to_string(), "empty".to_string()];
    header.extend((0..set.dim()).map(|i| format!("d{i}")));
    wtr.write_record(&header)?;
    for (i, row) in set.rows().enumerate() {
        let mut rec = vec![set.keypoints[i].to_string(), (set.empty[i] as u8).to_string()];
        rec.extend(row.iter().map(|v| v.to_string()));
        wtr.write_record(&rec)?;
    }
    wtr.flush()?;
    Ok(())
}
