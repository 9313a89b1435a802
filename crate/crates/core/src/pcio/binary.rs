//! Little-endian binary samples.
//!
//! Layout: magic `SPAL`, `u32` point count N, `u32` class count C, `u8`
//! has-color flag, then N records of `f64 x, y, z`, optionally `f64 r, g, b`,
//! and a `u32` label.

use super::PointCloud;
use crate::error::{Error, Result};

pub const BINARY_MAGIC: &[u8; 4] = b"SPAL";
const HEADER_LEN: usize = 13;

pub fn write_binary_sample(cloud: &PointCloud, num_classes: usize) -> Vec<u8> {
    let has_color = cloud.colors().is_some();
    let record = if has_color { 52 } else { 28 };
    let mut out = Vec::with_capacity(HEADER_LEN + record * cloud.len());
    out.extend_from_slice(BINARY_MAGIC);
    out.extend_from_slice(&(cloud.len() as u32).to_le_bytes());
    out.extend_from_slice(&(num_classes as u32).to_le_bytes());
    out.push(u8::from(has_color));
    for i in 0..cloud.len() {
        for v in cloud.points()[i] {
            out.extend_from_slice(&v.to_le_bytes());
        }
        if let Some(c) = cloud.colors() {
            for v in c[i] {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out.extend_from_slice(&cloud.labels()[i].to_le_bytes());
    }
    out
}

/// Returns the sample and the class count declared in its header.
pub fn read_binary_sample(bytes: &[u8], id: &str) -> Result<(PointCloud, usize)> {
    if bytes.len() < HEADER_LEN || &bytes[..4] != BINARY_MAGIC {
        return Err(Error::Format(format!("{id}: missing SPAL header")));
    }
    let n = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    let c = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let has_color = match bytes[12] {
        0 => false,
        1 => true,
        f => return Err(Error::Format(format!("{id}: bad color flag {f}"))),
    };
    if n == 0 {
        return Err(Error::EmptySample(id.to_string()));
    }
    let record = if has_color { 52 } else { 28 };
    let body = &bytes[HEADER_LEN..];
    if body.len() != n * record {
        return Err(Error::Format(format!(
            "{id}: expected {} payload bytes, found {}",
            n * record,
            body.len()
        )));
    }
    let f = |off: usize| f64::from_le_bytes(body[off..off + 8].try_into().unwrap());
    let mut points = Vec::with_capacity(n);
    let mut colors = has_color.then(|| Vec::with_capacity(n));
    let mut labels = Vec::with_capacity(n);
    for r in 0..n {
        let base = r * record;
        points.push([f(base), f(base + 8), f(base + 16)]);
        let mut off = base + 24;
        if let Some(cs) = colors.as_mut() {
            cs.push([f(off), f(off + 8), f(off + 16)]);
            off += 24;
        }
        let label = u32::from_le_bytes(body[off..off + 4].try_into().unwrap());
        if label as usize >= c {
            return Err(Error::LabelOutOfRange {
                label,
                num_classes: c,
                context: format!("{id} record {r}"),
            });
        }
        labels.push(label);
    }
    Ok((PointCloud::new(id, points, colors, labels, None)?, c))
}
