//! Anchor grid, feature-cell geometry and stage-1 proposal selection.

use crate::detectors::config::{DetectorConfig, FEATURE_STRIDE};
use crate::imaging::BBox;

/// Half-open rectangle of feature cells: rows `[r0, r1)`, columns `[c0, c1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CellRect {
    pub r0: usize,
    pub r1: usize,
    pub c0: usize,
    pub c1: usize,
}

impl CellRect {
    pub fn count(&self) -> usize {
        (self.r1 - self.r0) * (self.c1 - self.c0)
    }

    pub fn contains(&self, r: usize, c: usize) -> bool {
        r >= self.r0 && r < self.r1 && c >= self.c0 && c < self.c1
    }
}

/// Feature cells touched by a pixel box.
pub fn cells_for_box(b: &BBox, fh: usize, fw: usize) -> CellRect {
    CellRect {
        r0: (b.y1 / FEATURE_STRIDE).min(fh - 1),
        r1: b.y2.div_ceil(FEATURE_STRIDE).min(fh),
        c0: (b.x1 / FEATURE_STRIDE).min(fw - 1),
        c1: b.x2.div_ceil(FEATURE_STRIDE).min(fw),
    }
}

/// Box grown by half its size on every side, clipped to the image.
pub fn context_box(b: &BBox, height: usize, width: usize) -> BBox {
    let mx = b.width() / 2;
    let my = b.height() / 2;
    BBox {
        x1: b.x1.saturating_sub(mx),
        y1: b.y1.saturating_sub(my),
        x2: (b.x2 + mx).min(width),
        y2: (b.y2 + my).min(height),
    }
}

/// Every anchor, ordered by feature cell (row-major), then scale, then ratio.
pub fn anchor_grid(cfg: &DetectorConfig) -> Vec<BBox> {
    let (h, w) = cfg.input_size;
    let (fh, fw) = cfg.feature_size();
    let shapes: Vec<(usize, usize)> = cfg
        .anchor_scales
        .iter()
        .flat_map(|s| {
            cfg.anchor_ratios.iter().map(move |r| {
                let aw = (s * r.sqrt()).round().max(1.0) as usize;
                let ah = (s / r.sqrt()).round().max(1.0) as usize;
                (aw, ah)
            })
        })
        .collect();
    let mut out = Vec::with_capacity(fh * fw * shapes.len());
    for i in 0..fh {
        for j in 0..fw {
            let cx = FEATURE_STRIDE * j + FEATURE_STRIDE / 2;
            let cy = FEATURE_STRIDE * i + FEATURE_STRIDE / 2;
            for &(aw, ah) in &shapes {
                out.push(BBox {
                    x1: cx.saturating_sub(aw / 2),
                    y1: cy.saturating_sub(ah / 2),
                    x2: (cx + aw - aw / 2).min(w),
                    y2: (cy + ah - ah / 2).min(h),
                });
            }
        }
    }
    out
}

/// Summed-area tables for a stack of `channels x fh x fw` feature planes.
#[derive(Debug, Clone)]
pub struct FeatureSums {
    pub channels: usize,
    pub fh: usize,
    pub fw: usize,
    sums: Vec<f64>,
}

impl FeatureSums {
    pub fn new(data: &[f64], channels: usize, fh: usize, fw: usize) -> Self {
        let stride = (fh + 1) * (fw + 1);
        let mut sums = vec![0.0; channels * stride];
        for c in 0..channels {
            let plane = &data[c * fh * fw..(c + 1) * fh * fw];
            let s = &mut sums[c * stride..(c + 1) * stride];
            for r in 0..fh {
                let mut row = 0.0;
                for k in 0..fw {
                    row += plane[r * fw + k];
                    s[(r + 1) * (fw + 1) + k + 1] = s[r * (fw + 1) + k + 1] + row;
                }
            }
        }
        FeatureSums {
            channels,
            fh,
            fw,
            sums,
        }
    }

    pub fn rect_sum(&self, channel: usize, rect: &CellRect) -> f64 {
        let w = self.fw + 1;
        let s = &self.sums[channel * (self.fh + 1) * w..];
        s[rect.r1 * w + rect.c1] - s[rect.r0 * w + rect.c1] - s[rect.r1 * w + rect.c0] + s[rect.r0 * w + rect.c0]
    }
}

/// Inside / context geometry of one proposal on the feature grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RoiGeometry {
    pub inner: CellRect,
    pub context: CellRect,
}

impl RoiGeometry {
    pub fn new(b: &BBox, cfg: &DetectorConfig) -> Self {
        let (h, w) = cfg.input_size;
        let (fh, fw) = cfg.feature_size();
        RoiGeometry {
            inner: cells_for_box(b, fh, fw),
            context: cells_for_box(&context_box(b, h, w), fh, fw),
        }
    }

    pub fn ring_count(&self) -> usize {
        self.context.count() - self.inner.count()
    }

    /// Per-channel inside means followed by per-channel ring means.
    pub fn pooled(&self, sums: &FeatureSums) -> Vec<f64> {
        let n_in = self.inner.count() as f64;
        let n_ring = self.ring_count();
        let mut out = vec![0.0; 2 * sums.channels];
        for c in 0..sums.channels {
            let s_in = sums.rect_sum(c, &self.inner);
            out[c] = s_in / n_in;
            if n_ring > 0 {
                out[sums.channels + c] = (sums.rect_sum(c, &self.context) - s_in) / n_ring as f64;
            }
        }
        out
    }
}

/// Picks `count` anchors by descending mean objectness over their cells,
/// ties broken by anchor index; cycles through the ranking when fewer
/// anchors than `count` exist.
pub fn select_proposals(anchors: &[BBox], objectness: &[f64], cfg: &DetectorConfig) -> Vec<(BBox, f64)> {
    let (fh, fw) = cfg.feature_size();
    let sums = FeatureSums::new(objectness, 1, fh, fw);
    let scored: Vec<f64> = anchors
        .iter()
        .map(|a| {
            let r = cells_for_box(a, fh, fw);
            sums.rect_sum(0, &r) / r.count() as f64
        })
        .collect();
    let mut order: Vec<usize> = (0..anchors.len()).collect();
    let rank = |a: &usize, b: &usize| scored[*b].total_cmp(&scored[*a]).then(a.cmp(b));
    // only the leading `proposal_count` ranks are ever read
    if cfg.proposal_count < order.len() {
        order.select_nth_unstable_by(cfg.proposal_count, rank);
        order.truncate(cfg.proposal_count);
    }
    order.sort_unstable_by(rank);
    (0..cfg.proposal_count)
        .map(|i| {
            let k = order[i % order.len()];
            (anchors[k], scored[k].clamp(0.0, 1.0))
        })
        .collect()
}
