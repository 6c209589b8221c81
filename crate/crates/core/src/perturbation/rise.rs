use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::detectors::{Detection, Detector};
use crate::error::{Error, Result};
use crate::imaging::{bilinear_sample, Image, Mask, SaliencyMap};
use crate::seeds;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RiseConfig {
    pub n_masks: usize,
    pub grid_size: usize,
    pub keep_prob: f64,
    pub seed: u64,
}

impl Default for RiseConfig {
    fn default() -> Self {
        RiseConfig {
            n_masks: 500,
            grid_size: 8,
            keep_prob: 0.5,
            seed: 0,
        }
    }
}

impl RiseConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_masks == 0 {
            return Err(Error::invalid("RISE needs at least one mask"));
        }
        if self.grid_size < 2 {
            return Err(Error::invalid("RISE grid must have at least 2 cells per side"));
        }
        if !(self.keep_prob > 0.0 && self.keep_prob < 1.0) {
            return Err(Error::invalid(format!("keep probability {} outside (0, 1)", self.keep_prob)));
        }
        Ok(())
    }
}

/// Draws `n_masks` binary grids and upsamples each over an `h x w` image.
///
/// The sampled window spans `grid_size - 2` cells and starts at a random
/// sub-cell offset in `[0, 1)` per axis, so cell seams land at different
/// pixels in every mask.
pub fn generate_masks(cfg: &RiseConfig, h: usize, w: usize) -> Result<Vec<Mask>> {
    cfg.validate()?;
    if h < 2 || w < 2 {
        return Err(Error::invalid("mask size must be at least 2x2"));
    }
    let s = cfg.grid_size;
    let mut rng = ChaCha8Rng::seed_from_u64(seeds::derive(cfg.seed, "rise-masks", 0));
    let span = (s - 2).max(1) as f64;
    let step = (span / (h - 1) as f64, span / (w - 1) as f64);
    (0..cfg.n_masks)
        .map(|_| {
            let grid: Vec<u8> = (0..s * s).map(|_| rng.gen_bool(cfg.keep_prob) as u8).collect();
            let offset = (rng.gen::<f64>(), rng.gen::<f64>());
            let cells: Vec<f64> = grid.iter().map(|b| *b as f64).collect();
            let upsampled = bilinear_sample(&cells, s, s, h, w, step, offset)?;
            Ok(Mask {
                grid_size: s,
                grid,
                upsampled,
            })
        })
        .collect()
}

/// Box similarity used to weight D-RISE masks.
pub type Similarity = fn(target: &Detection, candidate: &Detection) -> f64;

/// `iou(target, candidate) * candidate.score`.
pub fn iou_score(target: &Detection, candidate: &Detection) -> f64 {
    target.bbox.iou(&candidate.bbox) * candidate.score
}

/// `sum_i weights[i] * masks[i] / norm`, accumulated in mask order.
pub fn weighted_sum(masks: &[Mask], weights: &[f64], norm: f64) -> Vec<f64> {
    let len = masks.first().map_or(0, |m| m.upsampled.len());
    let mut acc = vec![0.0; len];
    for (m, wt) in masks.iter().zip(weights) {
        if *wt != 0.0 {
            for (a, v) in acc.iter_mut().zip(&m.upsampled) {
                *a += wt * v;
            }
        }
    }
    acc.iter_mut().for_each(|a| *a /= norm);
    acc
}

// detections on every masked copy, in mask order
fn masked_detections<D: Detector + ?Sized>(image: &Image, detector: &D, masks: &[Mask]) -> Result<Vec<Vec<Detection>>> {
    masks
        .par_iter()
        .map(|m| detector.detect(&image.masked(&m.upsampled)?))
        .collect()
}

fn to_map(image: &Image, values: Vec<f64>, method: &str) -> Result<SaliencyMap> {
    // round-off can leave tiny negatives only when weights are negative,
    // which detector scores never are
    SaliencyMap::new(image.height(), image.width(), values, method)
}

pub fn rise<D: Detector + ?Sized>(image: &Image, detector: &D, cfg: &RiseConfig) -> Result<SaliencyMap> {
    let masks = generate_masks(cfg, image.height(), image.width())?;
    rise_with_masks(image, detector, &masks, cfg.keep_prob)
}

/// RISE over caller-supplied masks. Each mask is weighted by the best
/// final-detection score on the masked image (0 when nothing is found).
pub fn rise_with_masks<D: Detector + ?Sized>(image: &Image, detector: &D, masks: &[Mask], keep_prob: f64) -> Result<SaliencyMap> {
    let weights: Vec<f64> = masked_detections(image, detector, masks)?
        .iter()
        .map(|d| d.first().map_or(0.0, |d| d.score))
        .collect();
    let values = weighted_sum(masks, &weights, masks.len() as f64 * keep_prob);
    to_map(image, values, "rise")
}

pub fn drise<D: Detector + ?Sized>(image: &Image, detector: &D, target: &Detection, cfg: &RiseConfig) -> Result<SaliencyMap> {
    let mut maps = drise_many(image, detector, std::slice::from_ref(target), cfg, iou_score)?;
    Ok(maps.remove(0))
}

/// One D-RISE map per target, sharing the masked detector runs.
pub fn drise_many<D: Detector + ?Sized>(
    image: &Image,
    detector: &D,
    targets: &[Detection],
    cfg: &RiseConfig,
    similarity: Similarity,
) -> Result<Vec<SaliencyMap>> {
    let masks = generate_masks(cfg, image.height(), image.width())?;
    drise_with_masks(image, detector, targets, &masks, cfg.keep_prob, similarity)
}

pub fn drise_with_masks<D: Detector + ?Sized>(
    image: &Image,
    detector: &D,
    targets: &[Detection],
    masks: &[Mask],
    keep_prob: f64,
    similarity: Similarity,
) -> Result<Vec<SaliencyMap>> {
    let found = masked_detections(image, detector, masks)?;
    targets
        .iter()
        .map(|t| {
            let weights: Vec<f64> = found
                .iter()
                .map(|ds| ds.iter().map(|d| similarity(t, d)).fold(0.0, f64::max))
                .collect();
            let values = weighted_sum(masks, &weights, masks.len() as f64 * keep_prob);
            Ok(to_map(image, values, "drise")?.with_target(t.bbox))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detectors::{DetectorConfig, ProposalSet, Stage, StageOutputs};
    use crate::imaging::{normalize_values, BBox};

    /// Reports one fixed box whose score is a function of the image.
    struct Fixed {
        config: DetectorConfig,
        bbox: BBox,
        score: fn(&Image) -> f64,
    }

    impl Detector for Fixed {
        fn name(&self) -> &str {
            "fixed"
        }
        fn config(&self) -> &DetectorConfig {
            &self.config
        }
        fn run(&self, image: &Image) -> Result<StageOutputs> {
            let p = Detection {
                bbox: self.bbox,
                score: 1.0,
                stage: Stage::Proposal,
            };
            Ok(StageOutputs {
                proposals: ProposalSet { proposals: vec![p] },
                scores: vec![(self.score)(image)],
            })
        }
    }

    fn fixed(score: fn(&Image) -> f64) -> Fixed {
        Fixed {
            config: DetectorConfig::default(),
            bbox: BBox::new(4, 4, 12, 12).unwrap(),
            score,
        }
    }

    fn small() -> RiseConfig {
        RiseConfig {
            n_masks: 60,
            seed: 3,
            ..Default::default()
        }
    }

    #[test]
    fn default_masks() {
        let masks = generate_masks(&RiseConfig::default(), 32, 32).unwrap();
        assert_eq!(masks.len(), 500);
        assert!(masks.iter().all(|m| m.grid_size == 8 && m.grid.len() == 64 && m.upsampled.len() == 1024));
        assert!(masks.iter().flat_map(|m| &m.upsampled).all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn keep_rate_concentrates() {
        let masks = generate_masks(&RiseConfig::default(), 16, 16).unwrap();
        let n = (masks.len() * 64) as f64;
        let ones = masks.iter().flat_map(|m| &m.grid).filter(|b| **b == 1).count() as f64;
        let sigma = (n * 0.25).sqrt();
        assert!((ones - 0.5 * n).abs() <= 3.0 * sigma, "{ones} of {n}");
    }

    #[test]
    fn masks_are_seeded() {
        let a = generate_masks(&small(), 20, 24).unwrap();
        assert_eq!(a, generate_masks(&small(), 20, 24).unwrap());
        let other = RiseConfig { seed: 4, ..small() };
        assert_ne!(a, generate_masks(&other, 20, 24).unwrap());
    }

    #[test]
    fn bad_configs_rejected() {
        for cfg in [
            RiseConfig { n_masks: 0, ..small() },
            RiseConfig { grid_size: 1, ..small() },
            RiseConfig { keep_prob: 1.0, ..small() },
        ] {
            assert!(generate_masks(&cfg, 8, 8).is_err());
        }
    }

    #[test]
    fn constant_detector_gives_mask_sum() {
        let img = Image::filled(24, 24, 0.5).unwrap();
        let det = fixed(|_| 0.7);
        let masks = generate_masks(&small(), 24, 24).unwrap();
        let s = rise_with_masks(&img, &det, &masks, 0.5).unwrap();
        let plain = weighted_sum(&masks, &vec![1.0; masks.len()], 1.0);
        for (a, b) in normalize_values(&s.values).iter().zip(normalize_values(&plain)) {
            assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn all_ones_mask_reproduces_score() {
        let img = Image::filled(8, 8, 0.5).unwrap();
        let det = fixed(|_| 0.8);
        let mask = Mask {
            grid_size: 2,
            grid: vec![1; 4],
            upsampled: vec![1.0; 64],
        };
        let s = rise_with_masks(&img, &det, &[mask], 0.5).unwrap();
        assert!(s.values.iter().all(|v| (v - 1.6).abs() < 1e-12));
    }

    #[test]
    fn weights_scale_linearly() {
        let masks = generate_masks(&small(), 12, 12).unwrap();
        let w: Vec<f64> = (0..masks.len()).map(|i| (i % 7) as f64 / 7.0).collect();
        let w2: Vec<f64> = w.iter().map(|v| 2.0 * v).collect();
        let a = weighted_sum(&masks, &w, 1.0);
        let b = weighted_sum(&masks, &w2, 1.0);
        assert!(a.iter().zip(&b).all(|(x, y)| 2.0 * x == *y));
    }

    #[test]
    fn drise_without_detections_is_zero() {
        let img = Image::filled(16, 16, 0.5).unwrap();
        let det = fixed(|_| 0.1);
        let target = Detection {
            bbox: BBox::new(4, 4, 12, 12).unwrap(),
            score: 0.9,
            stage: Stage::Final,
        };
        let s = drise(&img, &det, &target, &small()).unwrap();
        assert!(s.values.iter().all(|v| *v == 0.0));
        assert_eq!(s.target_box, Some(target.bbox));
    }

    #[test]
    fn drise_reduces_to_rise_on_fixed_box() {
        let img = Image::filled(16, 16, 0.5).unwrap();
        let det = fixed(|_| 1.0);
        let target = Detection {
            bbox: det.bbox,
            score: 1.0,
            stage: Stage::Final,
        };
        let masks = generate_masks(&small(), 16, 16).unwrap();
        let r = rise_with_masks(&img, &det, &masks, 0.5).unwrap();
        let d = drise_with_masks(&img, &det, &[target], &masks, 0.5, iou_score).unwrap();
        assert!(r.values.iter().zip(&d[0].values).all(|(a, b)| (a - b).abs() < 1e-6));
    }
}
