//! `SAL1` raw grid format: magic `SAL1`, height and width as little-endian
//! `u32`, then `height * width` little-endian `f32` values in row-major order.

use std::path::Path;

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"SAL1";

#[derive(Debug, Clone, PartialEq)]
pub struct RawGrid {
    pub height: usize,
    pub width: usize,
    pub values: Vec<f32>,
}

pub fn encode(height: usize, width: usize, values: &[f64]) -> Result<Vec<u8>> {
    if values.len() != height * width {
        return Err(Error::invalid("grid size does not match dimensions"));
    }
    let h = u32::try_from(height).map_err(|_| Error::invalid("height exceeds u32"))?;
    let w = u32::try_from(width).map_err(|_| Error::invalid("width exceeds u32"))?;
    let mut out = Vec::with_capacity(12 + 4 * values.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&h.to_le_bytes());
    out.extend_from_slice(&w.to_le_bytes());
    for v in values {
        out.extend_from_slice(&(*v as f32).to_le_bytes());
    }
    Ok(out)
}

pub fn decode(bytes: &[u8]) -> Result<RawGrid> {
    if bytes.len() < 12 || &bytes[..4] != MAGIC {
        return Err(Error::Data("missing SAL1 header".into()));
    }
    let height = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    let width = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let body = &bytes[12..];
    if body.len() != 4 * height * width {
        return Err(Error::Data(format!(
            "SAL1 payload has {} bytes, expected {}",
            body.len(),
            4 * height * width
        )));
    }
    let values = body
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok(RawGrid {
        height,
        width,
        values,
    })
}

pub fn write(path: &Path, height: usize, width: usize, values: &[f64]) -> Result<()> {
    let bytes = encode(height, width, values)?;
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn read(path: &Path) -> Result<RawGrid> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes)
}
