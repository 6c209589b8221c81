use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::detectors::Detector;
use crate::error::{Error, Result};
use crate::imaging::{Image, SaliencyMap};
use crate::perturbation::lasso::LassoProblem;
use crate::perturbation::slic::{slic, Superpixels};
use crate::seeds;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LimeConfig {
    pub segments: usize,
    pub compactness: f64,
    pub slic_iters: usize,
    pub n_samples: usize,
    pub k_features: usize,
    pub kernel_width: f64,
    pub seed: u64,
}

impl Default for LimeConfig {
    fn default() -> Self {
        LimeConfig {
            segments: 40,
            compactness: 10.0,
            slic_iters: 10,
            n_samples: 1000,
            k_features: 5,
            kernel_width: 0.25,
            seed: 0,
        }
    }
}

/// Sparse linear surrogate over superpixel on/off indicators.
#[derive(Debug, Clone, PartialEq)]
pub struct SurrogateModel {
    pub weights: Vec<f64>,
    pub intercept: f64,
    /// Segment ids with nonzero weight, ascending.
    pub selected: Vec<usize>,
    pub lambda: f64,
    pub warning: Option<String>,
}

impl SurrogateModel {
    pub fn predict(&self, z: &[bool]) -> f64 {
        self.intercept + z.iter().zip(&self.weights).filter(|(on, _)| **on).map(|(_, w)| w).sum::<f64>()
    }
}

/// Copy of `image` with every segment whose flag is off filled with `fill`.
pub fn occlude(image: &Image, sp: &Superpixels, keep: &[bool], fill: f64) -> Result<Image> {
    let data = image
        .data()
        .iter()
        .zip(&sp.labels)
        .map(|(v, l)| if keep[*l] { *v } else { fill })
        .collect();
    Image::new(image.height(), image.width(), data)
}

/// Cosine distance between a 0/1 vector and the all-ones vector.
pub fn cosine_distance_to_ones(z: &[bool]) -> f64 {
    let on = z.iter().filter(|b| **b).count() as f64;
    if on == 0.0 {
        return 1.0;
    }
    // z.1 = on, |z| = sqrt(on), |1| = sqrt(len)
    1.0 - (on / z.len() as f64).sqrt()
}

pub fn lime<D: Detector + ?Sized>(image: &Image, detector: &D, cfg: &LimeConfig) -> Result<(SurrogateModel, SaliencyMap)> {
    let sp = slic(image, cfg.segments, cfg.compactness, cfg.slic_iters)?;
    lime_with_segments(image, detector, &sp, cfg)
}

/// LIME over a fixed segmentation. The first sample is the unoccluded
/// image; the rest switch each segment off with probability 1/2.
pub fn lime_with_segments<D: Detector + ?Sized>(
    image: &Image,
    detector: &D,
    sp: &Superpixels,
    cfg: &LimeConfig,
) -> Result<(SurrogateModel, SaliencyMap)> {
    let k = sp.k;
    if cfg.n_samples < 10 * cfg.k_features.max(1) {
        return Err(Error::invalid(format!(
            "LIME needs at least {} samples for {} features",
            10 * cfg.k_features.max(1),
            cfg.k_features
        )));
    }
    if !(cfg.kernel_width > 0.0) {
        return Err(Error::invalid("kernel width must be positive"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seeds::derive(cfg.seed, "lime-samples", 0));
    let mut samples: Vec<Vec<bool>> = Vec::with_capacity(cfg.n_samples);
    samples.push(vec![true; k]);
    while samples.len() < cfg.n_samples {
        samples.push((0..k).map(|_| rng.gen_bool(0.5)).collect());
    }
    let fill = image.mean();
    let labels: Vec<f64> = samples
        .par_iter()
        .map(|z| detector.score(&occlude(image, sp, z, fill)?))
        .collect::<Result<_>>()?;
    let sample_weights: Vec<f64> = samples
        .iter()
        .map(|z| {
            let d = cosine_distance_to_ones(z);
            (-d * d / (cfg.kernel_width * cfg.kernel_width)).exp()
        })
        .collect();

    let mut warning = None;
    let (weights, intercept, lambda) = if labels.iter().all(|l| *l == labels[0]) {
        warning = Some("every perturbed sample scored the same; surrogate is empty".to_string());
        (vec![0.0; k], labels[0], 0.0)
    } else {
        let x: Vec<f64> = samples.iter().flatten().map(|b| *b as u8 as f64).collect();
        let fit = LassoProblem::new(&x, samples.len(), k, &labels, &sample_weights)?.select(cfg.k_features);
        (fit.weights, fit.intercept, fit.lambda)
    };
    let selected: Vec<usize> = (0..k).filter(|j| weights[*j] != 0.0).collect();
    let values = sp.labels.iter().map(|l| weights[*l].max(0.0)).collect();
    let mut map = SaliencyMap::new(image.height(), image.width(), values, "lime")?;
    if let Some(w) = &warning {
        map = map.with_warning(w.clone());
    }
    Ok((
        SurrogateModel {
            weights,
            intercept,
            selected,
            lambda,
            warning,
        },
        map,
    ))
}
