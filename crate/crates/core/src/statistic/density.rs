use crate::detectors::ProposalSet;
use crate::error::{Error, Result};
use crate::imaging::BBox;

/// Per-pixel count of proposal boxes covering the pixel.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DensityMapResult {
    pub height: usize,
    pub width: usize,
    pub counts: Vec<u32>,
    pub max_count: u32,
}

impl DensityMapResult {
    pub fn at(&self, x: usize, y: usize) -> u32 {
        self.counts[y * self.width + x]
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.counts.iter().map(|c| *c as f64).collect()
    }
}

pub fn density_map(proposals: &ProposalSet, height: usize, width: usize) -> Result<DensityMapResult> {
    let boxes: Vec<BBox> = proposals.boxes().copied().collect();
    count_boxes(&boxes, height, width)
}

/// Counts with a 2-D difference array: +1 at each box's top-left corner,
/// -1 past its right and bottom edges, +1 past the far corner, then a
/// prefix sum.
pub fn count_boxes(boxes: &[BBox], height: usize, width: usize) -> Result<DensityMapResult> {
    if let Some(b) = boxes.iter().find(|b| !b.fits(height, width)) {
        return Err(Error::invalid(format!(
            "box {:?} lies outside the {height}x{width} image",
            b.to_array()
        )));
    }
    let w1 = width + 1;
    let mut diff = vec![0i64; (height + 1) * w1];
    for b in boxes {
        diff[b.y1 * w1 + b.x1] += 1;
        diff[b.y1 * w1 + b.x2] -= 1;
        diff[b.y2 * w1 + b.x1] -= 1;
        diff[b.y2 * w1 + b.x2] += 1;
    }
    let mut counts = vec![0u32; height * width];
    let mut above = vec![0i64; width];
    for y in 0..height {
        let mut run = 0i64;
        for x in 0..width {
            run += diff[y * w1 + x];
            above[x] += run;
            counts[y * width + x] = above[x] as u32;
        }
    }
    let max_count = counts.iter().copied().max().unwrap_or(0);
    Ok(DensityMapResult {
        height,
        width,
        counts,
        max_count,
    })
}
