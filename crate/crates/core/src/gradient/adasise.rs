use rayon::prelude::*;

use crate::detectors::{Detector, MiniCnn, Target};
use crate::error::{Error, Result};
use crate::gradient::cam::{layer_tensors, mean_gradient_weights};
use crate::imaging::{bilinear_upsample, normalize_values, otsu_binarize, Image, SaliencyMap};

/// Layers Ada-SISE reads by default, shallow to deep.
pub const DEFAULT_LAYERS: [&str; 2] = ["conv1", "conv2"];

/// Per-channel gradient scores of one layer and the channels that survive
/// the gate.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerAttribution {
    pub layer_name: String,
    pub channel_scores: Vec<f64>,
    /// Channels passing the positive-score and Otsu gates, ascending.
    pub kept: Vec<usize>,
    /// Per-channel activation planes, each `height x width`.
    pub maps: Vec<Vec<f64>>,
    pub height: usize,
    pub width: usize,
}

/// Channels with a positive score, then only the upper Otsu class of
/// those. With fewer than two distinct positive scores the Otsu split is
/// undefined and every positive channel is kept.
pub fn gate_channels(scores: &[f64]) -> Vec<usize> {
    let positive: Vec<usize> = (0..scores.len()).filter(|c| scores[*c] > 0.0).collect();
    let values: Vec<f64> = positive.iter().map(|c| scores[*c]).collect();
    match otsu_binarize(&values) {
        Ok(upper) => positive.into_iter().zip(upper).filter(|(_, u)| *u).map(|(c, _)| c).collect(),
        Err(_) => positive,
    }
}

/// Scores and gates the channels of `layer` in a trace that carries
/// gradients.
pub fn layer_attribution(trace: &crate::detectors::WhiteBoxTrace, layer: &str) -> Result<LayerAttribution> {
    let (act, grad, c, h, w) = layer_tensors(trace, layer)?;
    let channel_scores = mean_gradient_weights(grad, c);
    Ok(LayerAttribution {
        layer_name: layer.to_string(),
        kept: gate_channels(&channel_scores),
        maps: act.chunks(h * w).map(|p| p.to_vec()).collect(),
        channel_scores,
        height: h,
        width: w,
    })
}

/// Ada-SISE over the selected layers.
///
/// Every kept channel becomes a soft mask (upsampled, min-max
/// normalized). A layer's visualization sums its masks weighted by the
/// detector score on the image multiplied by that mask. The layer maps
/// are each normalized, summed and normalized again.
pub fn adasise(cnn: &MiniCnn, image: &Image, target: Target, layers: &[&str]) -> Result<SaliencyMap> {
    if layers.is_empty() {
        return Err(Error::invalid("Ada-SISE needs at least one layer"));
    }
    let trace = cnn.forward_trace(image)?;
    let back = cnn.backward_trace(&trace, target)?;
    let (oh, ow) = image.dims();
    let mut fused = vec![0.0; oh * ow];
    let mut any = false;
    for layer in layers {
        let attr = layer_attribution(&back, layer)?;
        if attr.kept.is_empty() {
            continue;
        }
        let masks: Vec<Vec<f64>> = attr
            .kept
            .iter()
            .map(|c| {
                let up = bilinear_upsample(&attr.maps[*c], attr.height, attr.width, oh, ow, (0.0, 0.0))?;
                Ok(normalize_values(&up))
            })
            .collect::<Result<_>>()?;
        let weights: Vec<f64> = masks
            .par_iter()
            .map(|m| cnn.score(&image.masked(m)?))
            .collect::<Result<_>>()?;
        let mut viz = vec![0.0; oh * ow];
        for (m, wt) in masks.iter().zip(&weights) {
            for (v, x) in viz.iter_mut().zip(m) {
                *v += wt * x;
            }
        }
        for (f, v) in fused.iter_mut().zip(normalize_values(&viz)) {
            *f += v;
        }
        any = true;
    }
    let map = SaliencyMap::new(oh, ow, normalize_values(&fused), "adasise")?;
    Ok(if any {
        map
    } else {
        map.with_warning("no channel has a positive gradient score")
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detectors::generate_scene;

    #[test]
    fn otsu_gate_keeps_high_scores() {
        assert_eq!(gate_channels(&[0.9, 0.85, 0.05, 0.04]), vec![0, 1]);
        assert_eq!(gate_channels(&[0.04, 0.9, 0.05, 0.85]), vec![1, 3]);
    }

    #[test]
    fn gate_drops_non_positive() {
        assert_eq!(gate_channels(&[-1.0, 0.0, 0.3]), vec![2]);
        assert!(gate_channels(&[-1.0, 0.0]).is_empty());
        // equal positive scores have no Otsu split
        assert_eq!(gate_channels(&[0.2, -0.1, 0.2]), vec![0, 2]);
    }

    #[test]
    fn gate_is_subset_of_positive() {
        let scores = [0.3, -0.2, 0.1, 0.7, 0.0, 0.65, 0.05];
        let positive: Vec<usize> = (0..scores.len()).filter(|c| scores[*c] > 0.0).collect();
        assert!(gate_channels(&scores).iter().all(|c| positive.contains(c)));
    }

    #[test]
    fn localizes_single_nodule() {
        let cnn = MiniCnn::default();
        let scene = generate_scene(128, 128, 1, 42).unwrap();
        let s = adasise(&cnn, &scene.image, Target::MaxScore, &DEFAULT_LAYERS).unwrap();
        let (y, x) = s.argmax();
        assert!(scene.ground_truth[0].contains(x, y), "({x},{y}) vs {:?}", scene.ground_truth[0]);
        assert!(s.warning.is_none());
    }

    #[test]
    fn single_channel_is_its_mask() {
        let cnn = MiniCnn::default();
        let scene = generate_scene(128, 128, 1, 42).unwrap();
        let trace = cnn.forward_trace(&scene.image).unwrap();
        let back = cnn.backward_trace(&trace, Target::MaxScore).unwrap();
        let attr = layer_attribution(&back, "conv2").unwrap();
        if attr.kept.len() == 1 {
            let s = adasise(&cnn, &scene.image, Target::MaxScore, &["conv2"]).unwrap();
            let c = attr.kept[0];
            let up = bilinear_upsample(&attr.maps[c], attr.height, attr.width, 128, 128, (0.0, 0.0)).unwrap();
            let expect = normalize_values(&up);
            assert!(s.values.iter().zip(&expect).all(|(a, b)| (a - b).abs() < 1e-12));
        }
    }

    #[test]
    fn unknown_layer_rejected() {
        let cnn = MiniCnn::default();
        let img = Image::filled(128, 128, 0.3).unwrap();
        assert!(adasise(&cnn, &img, Target::MaxScore, &["conv9"]).is_err());
        assert!(adasise(&cnn, &img, Target::MaxScore, &[]).is_err());
    }
}
