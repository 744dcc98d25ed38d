//! `.tns` layout: magic `TNS1`, `u8` rank, rank × `u32` LE dims, then the
//! payload as `f32` LE in row-major order.

use std::path::Path;

use crate::error::{Error, Result};

pub const TENSOR_MAGIC: &[u8; 4] = b"TNS1";

pub fn encode_tensor(dims: &[usize], data: &[f32]) -> Result<Vec<u8>> {
    if dims.is_empty() || dims.len() > 4 {
        return Err(Error::Shape(format!("tensor rank {} not in 1..=4", dims.len())));
    }
    let count = element_count(dims).ok_or_else(|| Error::Shape(format!("dims {dims:?} overflow")))?;
    if count != data.len() {
        return Err(Error::Shape(format!(
            "dims {dims:?} need {count} values, got {}",
            data.len()
        )));
    }
    let mut out = Vec::with_capacity(5 + 4 * dims.len() + 4 * data.len());
    out.extend_from_slice(TENSOR_MAGIC);
    out.push(dims.len() as u8);
    for &d in dims {
        let d = u32::try_from(d).map_err(|_| Error::Shape(format!("dim {d} exceeds u32")))?;
        out.extend_from_slice(&d.to_le_bytes());
    }
    for v in data {
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

pub fn decode_tensor(path: &Path, bytes: &[u8]) -> Result<(Vec<usize>, Vec<f32>)> {
    let bad = |msg: &str| Error::format(path, msg);
    if bytes.len() < 5 || &bytes[..4] != TENSOR_MAGIC {
        return Err(bad("bad magic"));
    }
    let rank = bytes[4] as usize;
    if !(1..=4).contains(&rank) {
        return Err(bad("rank not in 1..=4"));
    }
    let header = 5 + 4 * rank;
    if bytes.len() < header {
        return Err(bad("truncated header"));
    }
    let dims: Vec<usize> = bytes[5..header]
        .chunks_exact(4)
        .map(|c| u32::from_le_bytes([c[0], c[1], c[2], c[3]]) as usize)
        .collect();
    let count = element_count(&dims).ok_or_else(|| bad("dim overflow"))?;
    let payload = count.checked_mul(4).ok_or_else(|| bad("dim overflow"))?;
    if bytes.len() - header != payload {
        return Err(bad(&format!(
            "payload is {} bytes, dims {dims:?} need {payload}",
            bytes.len() - header
        )));
    }
    let data = bytes[header..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect();
    Ok((dims, data))
}

pub fn write_tensor(path: &Path, dims: &[usize], data: &[f32]) -> Result<()> {
    super::write_bytes(path, &encode_tensor(dims, data)?)
}

pub fn read_tensor(path: &Path) -> Result<(Vec<usize>, Vec<f32>)> {
    decode_tensor(path, &super::read_bytes(path)?)
}

fn element_count(dims: &[usize]) -> Option<usize> {
    dims.iter().try_fold(1usize, |acc, &d| acc.checked_mul(d))
}
