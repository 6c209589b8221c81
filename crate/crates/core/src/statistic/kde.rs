use serde::Serialize;

use crate::detectors::{Detection, ProposalSet};
use crate::error::{Error, Result};

const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Bandwidth choice for [`fit_kde`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Bandwidth {
    Fixed(f64),
    /// Silverman's rule on the mean per-axis standard deviation.
    Auto,
}

/// Smallest bandwidth the automatic rule returns, in pixels. Keeps the
/// estimate finite when every proposal shares one center.
pub const MIN_AUTO_BANDWIDTH: f64 = 1.0;

/// Isotropic Gaussian KDE over proposal centers, in pixel coordinates
/// where pixel `(row, col)` has center `(col + 0.5, row + 0.5)`.
#[derive(Debug, Clone, PartialEq)]
pub struct KdeModel {
    pub centers: Vec<(f64, f64)>,
    pub bandwidth: f64,
}

/// Density sampled at every pixel center.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityEstimate {
    pub height: usize,
    pub width: usize,
    pub grid: Vec<f64>,
    /// `(x, y)` pixel indices of the first row-major maximum.
    pub argmax_point: (usize, usize),
    pub argmax_value: f64,
}

impl DensityEstimate {
    pub fn at(&self, x: usize, y: usize) -> f64 {
        self.grid[y * self.width + x]
    }

    /// Riemann sum over unit pixels.
    pub fn integral(&self) -> f64 {
        self.grid.iter().sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PckdeMode {
    /// Ratio of densities; always in `(0, 1]`.
    #[default]
    Density,
    /// Ratio of log-densities `log p(argmax) / log p(center)`; needs every
    /// density involved to be below 1.
    LogLikelihood,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PckdeResult {
    pub score: f64,
    pub consistent: bool,
    pub detected_center: (f64, f64),
    /// Pixel holding the detected center, `(x, y)`.
    pub detected_pixel: (usize, usize),
    pub argmax: (usize, usize),
}

/// Predictions scoring above this are graded consistent.
pub const CONSISTENCY_THRESHOLD: f64 = 0.5;

pub fn fit_kde(proposals: &ProposalSet, bandwidth: Bandwidth) -> Result<KdeModel> {
    let centers: Vec<(f64, f64)> = proposals.boxes().map(|b| b.center()).collect();
    fit_centers(centers, bandwidth)
}

pub fn fit_centers(centers: Vec<(f64, f64)>, bandwidth: Bandwidth) -> Result<KdeModel> {
    if centers.is_empty() {
        return Err(Error::invalid("KDE needs at least one proposal"));
    }
    if centers.iter().any(|(x, y)| !x.is_finite() || !y.is_finite()) {
        return Err(Error::invalid("KDE centers must be finite"));
    }
    let bandwidth = match bandwidth {
        Bandwidth::Fixed(h) if h > 0.0 && h.is_finite() => h,
        Bandwidth::Fixed(h) => return Err(Error::invalid(format!("bandwidth must be positive, got {h}"))),
        Bandwidth::Auto => silverman(&centers),
    };
    Ok(KdeModel { centers, bandwidth })
}

/// `1.06 * sigma * n^(-1/5)`, sigma the mean of the two per-axis sample
/// standard deviations, floored at [`MIN_AUTO_BANDWIDTH`].
pub fn silverman(centers: &[(f64, f64)]) -> f64 {
    let n = centers.len() as f64;
    let sd = |f: fn(&(f64, f64)) -> f64| {
        if centers.len() < 2 {
            return 0.0;
        }
        let mean = centers.iter().map(f).sum::<f64>() / n;
        (centers.iter().map(|c| (f(c) - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    };
    let sigma = 0.5 * (sd(|c| c.0) + sd(|c| c.1));
    (1.06 * sigma * n.powf(-0.2)).max(MIN_AUTO_BANDWIDTH)
}

impl KdeModel {
    /// Direct evaluation at an arbitrary point.
    pub fn density_at(&self, x: f64, y: f64) -> f64 {
        let h = self.bandwidth;
        let sum: f64 = self
            .centers
            .iter()
            .map(|(cx, cy)| {
                let (u, v) = ((x - cx) / h, (y - cy) / h);
                (-0.5 * (u * u + v * v)).exp()
            })
            .sum();
        sum * INV_SQRT_2PI * INV_SQRT_2PI / (self.centers.len() as f64 * h * h)
    }

    /// Natural log of [`density_at`](Self::density_at), stable far from
    /// every center.
    pub fn log_density_at(&self, x: f64, y: f64) -> f64 {
        let h = self.bandwidth;
        let e: Vec<f64> = self
            .centers
            .iter()
            .map(|(cx, cy)| {
                let (u, v) = ((x - cx) / h, (y - cy) / h);
                -0.5 * (u * u + v * v)
            })
            .collect();
        let m = e.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = m + e.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
        lse - (2.0 * std::f64::consts::PI * self.centers.len() as f64 * h * h).ln()
    }
}

/// Evaluates the model at every pixel center. The Gaussian kernel factors
/// per axis, so the grid is a sum of `n` rank-one outer products.
pub fn kde_density(model: &KdeModel, height: usize, width: usize) -> Result<DensityEstimate> {
    if height == 0 || width == 0 {
        return Err(Error::invalid("density grid must be non-empty"));
    }
    let h = model.bandwidth;
    let axis = |c: f64, len: usize| -> Vec<f64> {
        (0..len)
            .map(|i| {
                let u = (i as f64 + 0.5 - c) / h;
                (-0.5 * u * u).exp()
            })
            .collect()
    };
    let mut grid = vec![0.0; height * width];
    for &(cx, cy) in &model.centers {
        let ky = axis(cy, height);
        let kx = axis(cx, width);
        for (row, wy) in grid.chunks_mut(width).zip(&ky) {
            if *wy == 0.0 {
                continue;
            }
            for (g, wx) in row.iter_mut().zip(&kx) {
                *g += wy * wx;
            }
        }
    }
    let norm = INV_SQRT_2PI * INV_SQRT_2PI / (model.centers.len() as f64 * h * h);
    grid.iter_mut().for_each(|g| *g *= norm);
    let idx = crate::imaging::argmax(&grid);
    Ok(DensityEstimate {
        height,
        width,
        argmax_point: (idx % width, idx / width),
        argmax_value: grid[idx],
        grid,
    })
}

/// Grades a final detection by the density at the pixel holding its
/// center relative to the grid maximum.
pub fn pckde(model: &KdeModel, estimate: &DensityEstimate, detection: &Detection, mode: PckdeMode) -> Result<PckdeResult> {
    if !(estimate.argmax_value > 0.0) {
        return Err(Error::degenerate("density is zero everywhere; cannot grade the detection"));
    }
    let center = detection.bbox.center();
    let pixel = (
        (center.0.floor() as usize).min(estimate.width - 1),
        (center.1.floor() as usize).min(estimate.height - 1),
    );
    let am = estimate.argmax_point;
    let score = if pixel == am {
        1.0
    } else {
        let at = |p: (usize, usize)| model.log_density_at(p.0 as f64 + 0.5, p.1 as f64 + 0.5);
        let (l_det, l_max) = (at(pixel), at(am));
        match mode {
            PckdeMode::Density => (l_det - l_max).exp().clamp(f64::MIN_POSITIVE, 1.0),
            PckdeMode::LogLikelihood => {
                if l_max >= 0.0 {
                    return Err(Error::numeric(
                        "log-likelihood grading needs densities below 1 (bandwidth too small)",
                    ));
                }
                (l_max / l_det).clamp(f64::MIN_POSITIVE, 1.0)
            }
        }
    };
    Ok(PckdeResult {
        score,
        consistent: score > CONSISTENCY_THRESHOLD,
        detected_center: center,
        detected_pixel: pixel,
        argmax: am,
    })
}
