use crate::detectors::{MiniCnn, Target, WhiteBoxTrace};
use crate::error::{Error, Result};
use crate::imaging::{bilinear_upsample, Image, SaliencyMap};

/// Last convolutional layer, the one both CAM variants read.
pub const CAM_LAYER: &str = "conv2";

/// Activation and gradient of a `C x h x w` layer from a backward trace.
pub(crate) fn layer_tensors<'a>(trace: &'a WhiteBoxTrace, layer: &str) -> Result<(&'a [f64], &'a [f64], usize, usize, usize)> {
    let t = trace
        .layer(layer)
        .ok_or_else(|| Error::invalid(format!("trace has no layer `{layer}`")))?;
    if t.shape.len() != 3 {
        return Err(Error::invalid(format!("layer `{layer}` is not a feature map stack")));
    }
    let grad = t
        .gradient
        .as_deref()
        .ok_or_else(|| Error::invalid(format!("layer `{layer}` has no gradient; run the backward pass first")))?;
    Ok((&t.activation, grad, t.shape[0], t.shape[1], t.shape[2]))
}

/// Spatial mean of the gradient per channel.
pub fn mean_gradient_weights(grad: &[f64], channels: usize) -> Vec<f64> {
    let plane = grad.len() / channels;
    grad.chunks(plane).map(|g| g.iter().sum::<f64>() / plane as f64).collect()
}

/// Grad-CAM++ channel weights: `sum_ij alpha_ij relu(g_ij)` with
/// `alpha = g^2 / (2 g^2 + sum_ab A_ab g^3)`, taken as 0 where the
/// denominator vanishes.
pub fn gradcampp_weights(act: &[f64], grad: &[f64], channels: usize) -> Vec<f64> {
    let plane = grad.len() / channels;
    (0..channels)
        .map(|c| {
            let a = &act[c * plane..(c + 1) * plane];
            let g = &grad[c * plane..(c + 1) * plane];
            let act_sum: f64 = a.iter().sum();
            g.iter()
                .map(|gv| {
                    let g2 = gv * gv;
                    let den = 2.0 * g2 + act_sum * g2 * gv;
                    if den == 0.0 {
                        0.0
                    } else {
                        g2 / den * gv.max(0.0)
                    }
                })
                .sum()
        })
        .collect()
}

/// `sum_c weights[c] * act[c]` before rectification.
pub fn weighted_sum_maps(act: &[f64], weights: &[f64]) -> Vec<f64> {
    let plane = act.len() / weights.len();
    let mut out = vec![0.0; plane];
    for (a, w) in act.chunks(plane).zip(weights) {
        if *w != 0.0 {
            for (o, v) in out.iter_mut().zip(a) {
                *o += w * v;
            }
        }
    }
    out
}

fn cam(cnn: &MiniCnn, image: &Image, target: Target, plus: bool) -> Result<SaliencyMap> {
    let trace = cnn.forward_trace(image)?;
    let back = cnn.backward_trace(&trace, target)?;
    let (act, grad, c, h, w) = layer_tensors(&back, CAM_LAYER)?;
    let weights = if plus {
        gradcampp_weights(act, grad, c)
    } else {
        mean_gradient_weights(grad, c)
    };
    let low: Vec<f64> = weighted_sum_maps(act, &weights).into_iter().map(|v| v.max(0.0)).collect();
    let (oh, ow) = image.dims();
    let values = bilinear_upsample(&low, h, w, oh, ow, (0.0, 0.0))?;
    SaliencyMap::new(oh, ow, values, if plus { "gradcampp" } else { "gradcam" })
}

pub fn gradcam(cnn: &MiniCnn, image: &Image, target: Target) -> Result<SaliencyMap> {
    cam(cnn, image, target, false)
}

pub fn gradcampp(cnn: &MiniCnn, image: &Image, target: Target) -> Result<SaliencyMap> {
    cam(cnn, image, target, true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detectors::{generate_scene, MiniCnnWeights};
    use crate::imaging::normalize_values;

    #[test]
    fn zero_gradient_means_zero_map() {
        let act = vec![1.0; 2 * 9];
        let grad = vec![0.0; 2 * 9];
        let w = mean_gradient_weights(&grad, 2);
        assert_eq!(w, vec![0.0, 0.0]);
        assert_eq!(gradcampp_weights(&act, &grad, 2), vec![0.0, 0.0]);
        assert!(weighted_sum_maps(&act, &w).iter().all(|v| *v == 0.0));
    }

    #[test]
    fn uniform_gradient_matches_plain_cam() {
        let act: Vec<f64> = (0..2 * 16).map(|i| if i < 16 { (i % 5) as f64 } else { 0.0 }).collect();
        let mut grad = vec![0.0; 32];
        grad[..16].iter_mut().for_each(|g| *g = 0.3);
        let a = weighted_sum_maps(&act, &mean_gradient_weights(&grad, 2));
        let b = weighted_sum_maps(&act, &gradcampp_weights(&act, &grad, 2));
        let (a, b) = (normalize_values(&a), normalize_values(&b));
        assert!(a.iter().zip(&b).all(|(x, y)| (x - y).abs() < 1e-12));
        assert_eq!(a, normalize_values(&act[..16]));
    }

    #[test]
    fn localizes_single_nodule() {
        let cnn = MiniCnn::default();
        let scene = generate_scene(128, 128, 1, 42).unwrap();
        let gt = scene.ground_truth[0];
        for f in [gradcam, gradcampp] {
            let s = f(&cnn, &scene.image, Target::MaxScore).unwrap();
            assert!(s.values.iter().all(|v| *v >= 0.0));
            let (y, x) = s.argmax();
            assert!(gt.contains(x, y), "{} argmax ({x},{y}) outside {:?}", s.method, gt);
        }
    }

    #[test]
    fn negated_head_flips_sign() {
        let cnn = MiniCnn::default();
        let scene = generate_scene(128, 128, 1, 42).unwrap();
        let mut w: MiniCnnWeights = cnn.weights().clone();
        w.head.iter_mut().for_each(|v| *v = -*v);
        let neg = cnn.with_weights(w).unwrap();
        // explain the same proposal through the logit so only the head differs
        let t = cnn.forward_trace(&scene.image).unwrap();
        let target = Target::ProposalLogit(t.best);
        let pre = |m: &MiniCnn| {
            let tr = m.forward_trace(&scene.image).unwrap();
            let b = m.backward_trace(&tr, target).unwrap();
            let (act, grad, c, _, _) = layer_tensors(&b, CAM_LAYER).unwrap();
            weighted_sum_maps(act, &mean_gradient_weights(grad, c))
        };
        let (p, n) = (pre(&cnn), pre(&neg));
        assert!(p.iter().zip(&n).all(|(a, b)| (a + b).abs() < 1e-12));
        assert!(p.iter().any(|v| *v > 0.0));
    }

    #[test]
    fn bad_target_rejected() {
        let cnn = MiniCnn::default();
        let img = Image::filled(128, 128, 0.3).unwrap();
        assert!(gradcam(&cnn, &img, Target::ProposalScore(10_000)).is_err());
    }
}
