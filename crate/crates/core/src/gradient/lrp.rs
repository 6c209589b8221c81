use crate::detectors::minicnn::{conv3x3_transpose, unpool2, CONV1_CHANNELS, CONV2_CHANNELS, ROI_FEATURES};
use crate::detectors::{MiniCnn, Target};
use crate::error::{Error, Result};
use crate::imaging::{Image, SaliencyMap};

/// Relevance per recorded layer, from the explained output down to the
/// input pixels. Values may be negative.
#[derive(Debug, Clone, PartialEq)]
pub struct RelevanceField {
    /// `(layer name, shape, relevance)` from the output side downwards,
    /// mirroring the trace activations.
    pub layers: Vec<(&'static str, Vec<usize>, Vec<f64>)>,
    pub height: usize,
    pub width: usize,
    pub epsilon: f64,
    /// Relevance injected at the output.
    pub score: f64,
}

impl RelevanceField {
    pub fn layer(&self, name: &str) -> Option<&[f64]> {
        self.layers.iter().find(|l| l.0 == name).map(|l| l.2.as_slice())
    }

    pub fn input(&self) -> &[f64] {
        self.layer("input").expect("input relevance present")
    }

    pub fn input_total(&self) -> f64 {
        self.input().iter().sum()
    }

    /// `|sum input relevance - score| / |score|`.
    pub fn conservation_error(&self) -> f64 {
        (self.input_total() - self.score).abs() / self.score.abs()
    }

    /// Saliency from absolute input relevance.
    pub fn to_saliency(&self) -> Result<SaliencyMap> {
        let values = self.input().iter().map(|r| r.abs()).collect();
        SaliencyMap::new(self.height, self.width, values, "lrp")
    }
}

fn stabilize(z: f64, eps: f64) -> f64 {
    // sign(0) taken as +1 so a zero pre-activation never divides by zero
    z + if z >= 0.0 { eps } else { -eps }
}

/// Epsilon rule through one dense layer `z_k = sum_j a_j w[k][j]`:
/// `R_j = sum_k a_j w[k][j] / (z_k + eps sign z_k) R_k`.
/// `weights` is row-major `outputs x inputs`.
pub fn lrp_dense(a: &[f64], weights: &[f64], relevance_out: &[f64], eps: f64) -> Result<Vec<f64>> {
    let n_in = a.len();
    if n_in == 0 || weights.len() != n_in * relevance_out.len() {
        return Err(Error::invalid("dense layer shapes do not match"));
    }
    let mut out = vec![0.0; n_in];
    for (row, r) in weights.chunks(n_in).zip(relevance_out) {
        let z: f64 = row.iter().zip(a).map(|(w, x)| w * x).sum();
        let s = r / stabilize(z, eps);
        for ((o, w), x) in out.iter_mut().zip(row).zip(a) {
            *o += x * w * s;
        }
    }
    Ok(out)
}

// rows/cols holding nonzero entries of a C x h x w stack, grown by one
fn support(t: &[f64], c: usize, h: usize, w: usize) -> Option<(usize, usize, usize, usize)> {
    let (mut r0, mut r1, mut c0, mut c1) = (h, 0, w, 0);
    for ch in 0..c {
        for y in 0..h {
            for x in 0..w {
                if t[(ch * h + y) * w + x] != 0.0 {
                    r0 = r0.min(y);
                    r1 = r1.max(y + 1);
                    c0 = c0.min(x);
                    c1 = c1.max(x + 1);
                }
            }
        }
    }
    (r0 < r1).then(|| (r0.saturating_sub(1), (r1 + 1).min(h), c0.saturating_sub(1), (c1 + 1).min(w)))
}

// conv3x3_transpose evaluated only on the window around the support of `s`;
// everything outside that window is exactly zero
fn sparse_transpose(s: &[f64], cin: usize, cout: usize, h: usize, w: usize, weights: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; cin * h * w];
    let Some((r0, r1, c0, c1)) = support(s, cout, h, w) else {
        return out;
    };
    let (wh, ww) = (r1 - r0, c1 - c0);
    let mut crop = vec![0.0; cout * wh * ww];
    for ch in 0..cout {
        for y in 0..wh {
            let src = (ch * h + r0 + y) * w + c0;
            crop[(ch * wh + y) * ww..(ch * wh + y + 1) * ww].copy_from_slice(&s[src..src + ww]);
        }
    }
    let back = conv3x3_transpose(&crop, cin, wh, ww, weights, cout);
    for ch in 0..cin {
        for y in 0..wh {
            let dst = (ch * h + r0 + y) * w + c0;
            out[dst..dst + ww].copy_from_slice(&back[(ch * wh + y) * ww..(ch * wh + y + 1) * ww]);
        }
    }
    out
}

/// Epsilon-rule LRP of the target output back to the input pixels.
///
/// The output relevance equals the explained value (the stage-2 score, or
/// the logit for [`Target::ProposalLogit`]) and enters at the dense head.
/// RoI means are treated as dense layers with weights `1/area`, max-pool
/// routes relevance to the winning input, ReLU passes it unchanged.
pub fn lrp_epsilon(cnn: &MiniCnn, image: &Image, target: Target, epsilon: f64) -> Result<RelevanceField> {
    if !(epsilon >= 0.0) {
        return Err(Error::invalid("epsilon must be non-negative"));
    }
    let trace = cnn.forward_trace(image)?;
    let t = trace.resolve(target)?;
    let (h, w) = image.dims();
    let (h2, w2) = (h / 2, w / 2);
    let fh = trace.layer("pool2").expect("pool2").shape[1];
    let fw = trace.layer("pool2").expect("pool2").shape[2];
    let act = |name: &str| trace.layer(name).expect("layer recorded").activation.as_slice();
    let wt = cnn.weights();

    let score = match target {
        Target::ProposalLogit(_) => act("logit")[t],
        _ => act("score")[t],
    };
    let roi = &act("roi")[t * ROI_FEATURES..(t + 1) * ROI_FEATURES];
    let r_roi = lrp_dense(roi, &wt.head, &[score], epsilon)?;

    let geo = trace.geometry[t];
    let pool2 = act("pool2");
    let cells = fh * fw;
    let mut r_pool2 = vec![0.0; CONV2_CHANNELS * cells];
    let (n_in, n_ring) = (geo.inner.count() as f64, geo.ring_count() as f64);
    for c in 0..CONV2_CHANNELS {
        // roi[c] = mean over inner cells; roi[C + c] = mean over ring cells
        let s_in = r_roi[c] / stabilize(roi[c], epsilon) / n_in;
        let s_ring = if n_ring > 0.0 {
            r_roi[CONV2_CHANNELS + c] / stabilize(roi[CONV2_CHANNELS + c], epsilon) / n_ring
        } else {
            0.0
        };
        for r in geo.context.r0..geo.context.r1 {
            for col in geo.context.c0..geo.context.c1 {
                let i = c * cells + r * fw + col;
                r_pool2[i] = pool2[i] * if geo.inner.contains(r, col) { s_in } else { s_ring };
            }
        }
    }

    let r_conv2 = unpool2(&r_pool2, &trace.pool2_switch, CONV2_CHANNELS, h2, w2);
    let s2: Vec<f64> = r_conv2
        .iter()
        .zip(act("conv2_pre"))
        .map(|(r, z)| if *r == 0.0 { 0.0 } else { r / stabilize(*z, epsilon) })
        .collect();
    let r_pool1: Vec<f64> = sparse_transpose(&s2, CONV1_CHANNELS, CONV2_CHANNELS, h2, w2, &wt.conv2)
        .iter()
        .zip(act("pool1"))
        .map(|(c, a)| c * a)
        .collect();

    let r_conv1 = unpool2(&r_pool1, &trace.pool1_switch, CONV1_CHANNELS, h, w);
    let s1: Vec<f64> = r_conv1
        .iter()
        .zip(act("conv1_pre"))
        .map(|(r, z)| if *r == 0.0 { 0.0 } else { r / stabilize(*z, epsilon) })
        .collect();
    let r_input: Vec<f64> = sparse_transpose(&s1, 1, CONV1_CHANNELS, h, w, &wt.conv1)
        .iter()
        .zip(image.data())
        .map(|(c, a)| c * a)
        .collect();

    let n = trace.proposals.count();
    let mut r_logit = vec![0.0; n];
    r_logit[t] = score;
    Ok(RelevanceField {
        layers: vec![
            ("logit", vec![n], r_logit),
            ("roi", vec![ROI_FEATURES], r_roi),
            ("pool2", vec![CONV2_CHANNELS, fh, fw], r_pool2),
            ("conv2", vec![CONV2_CHANNELS, h2, w2], r_conv2),
            ("pool1", vec![CONV1_CHANNELS, h2, w2], r_pool1),
            ("conv1", vec![CONV1_CHANNELS, h, w], r_conv1),
            ("input", vec![1, h, w], r_input),
        ],
        height: h,
        width: w,
        epsilon,
        score,
    })
}
