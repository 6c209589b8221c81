use serde::Serialize;

use crate::detectors::{Detection, ProposalSet};
use crate::error::{Error, Result};
use crate::statistic::{DensityEstimate, DensityMapResult};

/// Default border band width in pixels.
pub const DEFAULT_BORDER_BAND: usize = 16;

/// Stage-1 summary for an image, built even when nothing was detected.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NegativeCaseReport {
    pub detections: usize,
    pub proposals: usize,
    pub band: usize,
    /// Share of the image area inside the band; the value both mass
    /// fractions would take under a uniform spread.
    pub band_area_fraction: f64,
    pub kde_border_fraction: f64,
    pub dm_border_fraction: f64,
}

impl NegativeCaseReport {
    pub fn is_negative(&self) -> bool {
        self.detections == 0
    }

    pub fn kde_interior_fraction(&self) -> f64 {
        1.0 - self.kde_border_fraction
    }

    pub fn dm_interior_fraction(&self) -> f64 {
        1.0 - self.dm_border_fraction
    }
}

fn in_band(x: usize, y: usize, h: usize, w: usize, band: usize) -> bool {
    x < band || y < band || x + band >= w || y + band >= h
}

/// Fraction of `values` lying within `band` pixels of the image edge; 0
/// when the total is 0.
pub fn border_fraction(values: &[f64], height: usize, width: usize, band: usize) -> f64 {
    let mut border = 0.0;
    let mut total = 0.0;
    for (i, v) in values.iter().enumerate() {
        total += v;
        if in_band(i % width, i / width, height, width, band) {
            border += v;
        }
    }
    if total > 0.0 {
        border / total
    } else {
        0.0
    }
}

pub fn negative_case_report(
    proposals: &ProposalSet,
    detections: &[Detection],
    estimate: &DensityEstimate,
    dm: &DensityMapResult,
    band: usize,
) -> Result<NegativeCaseReport> {
    let (h, w) = (estimate.height, estimate.width);
    if (dm.height, dm.width) != (h, w) {
        return Err(Error::invalid("density estimate and density map sizes differ"));
    }
    let band_pixels = (0..h * w).filter(|i| in_band(i % w, i / w, h, w, band)).count();
    Ok(NegativeCaseReport {
        detections: detections.len(),
        proposals: proposals.count(),
        band,
        band_area_fraction: band_pixels as f64 / (h * w) as f64,
        kde_border_fraction: border_fraction(&estimate.grid, h, w, band),
        dm_border_fraction: border_fraction(&dm.to_f64(), h, w, band),
    })
}
