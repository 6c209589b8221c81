//! Miniature two-stage CNN detector with hand-written forward and reverse
//! passes.
//!
//! | layer       | shape (C x H x W)  | op                                  |
//! |-------------|--------------------|-------------------------------------|
//! | `input`     | 1 x 128 x 128      |                                     |
//! | `conv1_pre` | 8 x 128 x 128      | 3x3 conv, edge replication          |
//! | `conv1`     | 8 x 128 x 128      | ReLU                                |
//! | `pool1`     | 8 x 64 x 64        | 2x2 max pool                        |
//! | `conv2_pre` | 16 x 64 x 64       | 3x3 conv, edge replication          |
//! | `conv2`     | 16 x 64 x 64       | ReLU (final convolutional layer)    |
//! | `pool2`     | 16 x 32 x 32       | 2x2 max pool                        |
//! | `objectness`| 1 x 32 x 32        | 1x1 conv + sigmoid (stage 1)        |
//! | `roi`       | P x 32             | inside / ring mean pooling per box  |
//! | `logit`     | P                  | dense                               |
//! | `score`     | P                  | sigmoid(logit - score_offset)       |
//!
//! `P` is the proposal count (300 by default). Weights are hand-built
//! smoothing, spot and edge filters; all biases default to zero.

use crate::detectors::anchors::{anchor_grid, select_proposals, FeatureSums, RoiGeometry};
use crate::detectors::{check_input, sigmoid, Detection, Detector, DetectorConfig, ProposalSet, Stage, StageOutputs};
use crate::error::{Error, Result};
use crate::imaging::{BBox, Image};

pub const CONV1_CHANNELS: usize = 8;
pub const CONV2_CHANNELS: usize = 16;
pub const ROI_FEATURES: usize = 2 * CONV2_CHANNELS;

#[derive(Debug, Clone, PartialEq)]
pub struct MiniCnnWeights {
    /// `[8][1][3][3]`
    pub conv1: Vec<f64>,
    pub conv1_bias: Vec<f64>,
    /// `[16][8][3][3]`
    pub conv2: Vec<f64>,
    pub conv2_bias: Vec<f64>,
    /// Stage-1 1x1 conv over `pool2`.
    pub objectness: Vec<f64>,
    pub objectness_offset: f64,
    /// Stage-2 dense layer over inside means (first 16) and ring means.
    pub head: Vec<f64>,
    pub head_bias: f64,
    /// Score calibration: `score = sigmoid(logit - score_offset)`.
    pub score_offset: f64,
}

fn tap(w: &mut [f64], cin: usize, oc: usize, ic: usize, ky: usize, kx: usize, v: f64) {
    w[((oc * cin + ic) * 3 + ky) * 3 + kx] = v;
}

fn kernel(w: &mut [f64], cin: usize, oc: usize, ic: usize, k: [[f64; 3]; 3]) {
    for (ky, row) in k.iter().enumerate() {
        for (kx, v) in row.iter().enumerate() {
            tap(w, cin, oc, ic, ky, kx, *v);
        }
    }
}

const SMOOTH: [[f64; 3]; 3] = [[1.0 / 9.0; 3]; 3];
const GAUSS: [[f64; 3]; 3] = [
    [0.0625, 0.125, 0.0625],
    [0.125, 0.25, 0.125],
    [0.0625, 0.125, 0.0625],
];
const SPOT: [[f64; 3]; 3] = [
    [-0.125, -0.125, -0.125],
    [-0.125, 1.0, -0.125],
    [-0.125, -0.125, -0.125],
];
const EDGE_X: [[f64; 3]; 3] = [[-0.25, 0.0, 0.25], [-0.5, 0.0, 0.5], [-0.25, 0.0, 0.25]];
const EDGE_Y: [[f64; 3]; 3] = [[-0.25, -0.5, -0.25], [0.0, 0.0, 0.0], [0.25, 0.5, 0.25]];

fn neg(k: [[f64; 3]; 3]) -> [[f64; 3]; 3] {
    k.map(|r| r.map(|v| -v))
}

impl Default for MiniCnnWeights {
    fn default() -> Self {
        let mut conv1 = vec![0.0; CONV1_CHANNELS * 9];
        // 0 box smoothing, 1/2 bright/dark spot, 3-6 signed edges, 7 gaussian
        let c1 = [SMOOTH, SPOT, neg(SPOT), EDGE_X, neg(EDGE_X), EDGE_Y, neg(EDGE_Y), GAUSS];
        for (oc, k) in c1.into_iter().enumerate() {
            kernel(&mut conv1, 1, oc, 0, k);
        }

        let cin = CONV1_CHANNELS;
        let mut conv2 = vec![0.0; CONV2_CHANNELS * cin * 9];
        kernel(&mut conv2, cin, 0, 0, SMOOTH); // brightness
        kernel(&mut conv2, cin, 1, 7, SMOOTH);
        kernel(&mut conv2, cin, 2, 0, SPOT); // coarse bright blob
        kernel(&mut conv2, cin, 3, 0, neg(SPOT));
        for ic in 3..7 {
            tap(&mut conv2, cin, 4, ic, 1, 1, 0.5); // edge energy
        }
        kernel(&mut conv2, cin, 5, 1, SMOOTH);
        kernel(&mut conv2, cin, 6, 2, SMOOTH);
        tap(&mut conv2, cin, 7, 0, 1, 1, 0.5);
        tap(&mut conv2, cin, 7, 7, 1, 1, 0.5);
        for k in 0..3 {
            tap(&mut conv2, cin, 8, 0, k, 0, 1.0 / 3.0);
            tap(&mut conv2, cin, 9, 0, k, 2, 1.0 / 3.0);
            tap(&mut conv2, cin, 10, 0, 0, k, 1.0 / 3.0);
            tap(&mut conv2, cin, 11, 0, 2, k, 1.0 / 3.0);
        }
        for (oc, ic) in (12..16).zip(3..7) {
            kernel(&mut conv2, cin, oc, ic, SMOOTH);
        }

        let mut objectness = vec![0.0; CONV2_CHANNELS];
        objectness[0] = 10.0;
        objectness[1] = 5.0;
        objectness[2] = 10.0;
        objectness[7] = 5.0;

        let g = 25.0;
        let mut head = vec![0.0; ROI_FEATURES];
        for (c, v) in [(0, 0.6), (1, 0.3), (2, 0.6), (5, 0.2), (7, 0.3)] {
            head[c] = g * v;
        }
        for (c, v) in [(0, -0.6), (1, -0.3), (7, -0.3)] {
            head[CONV2_CHANNELS + c] = g * v;
        }

        MiniCnnWeights {
            conv1,
            conv1_bias: vec![0.0; CONV1_CHANNELS],
            conv2,
            conv2_bias: vec![0.0; CONV2_CHANNELS],
            objectness,
            objectness_offset: 12.0,
            head,
            head_bias: 0.0,
            score_offset: 8.0,
        }
    }
}

impl MiniCnnWeights {
    fn validate(&self) -> Result<()> {
        let ok = self.conv1.len() == CONV1_CHANNELS * 9
            && self.conv1_bias.len() == CONV1_CHANNELS
            && self.conv2.len() == CONV2_CHANNELS * CONV1_CHANNELS * 9
            && self.conv2_bias.len() == CONV2_CHANNELS
            && self.objectness.len() == CONV2_CHANNELS
            && self.head.len() == ROI_FEATURES;
        if !ok {
            return Err(Error::Config("MiniCNN weight tensors have wrong sizes".into()));
        }
        Ok(())
    }
}

/// Which scalar output to differentiate or explain.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Target {
    /// Largest stage-2 score over all proposals.
    MaxScore,
    /// Stage-2 score of the proposal at this index.
    ProposalScore(usize),
    /// Pre-sigmoid logit of the proposal at this index.
    ProposalLogit(usize),
}

/// One recorded tensor with an optional gradient of the target scalar.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceTensor {
    pub name: &'static str,
    pub shape: Vec<usize>,
    pub activation: Vec<f64>,
    pub gradient: Option<Vec<f64>>,
}

impl TraceTensor {
    fn new(name: &'static str, shape: Vec<usize>, activation: Vec<f64>) -> Self {
        debug_assert_eq!(shape.iter().product::<usize>(), activation.len());
        TraceTensor {
            name,
            shape,
            activation,
            gradient: None,
        }
    }
}

/// Every activation of one forward pass, plus gradients after
/// [`MiniCnn::backward_trace`].
#[derive(Debug, Clone)]
pub struct WhiteBoxTrace {
    pub layers: Vec<TraceTensor>,
    /// Winner index (within each input plane) for every `pool1` / `pool2` cell.
    pub pool1_switch: Vec<u32>,
    pub pool2_switch: Vec<u32>,
    pub proposals: ProposalSet,
    pub geometry: Vec<RoiGeometry>,
    /// Index of the highest-scoring proposal (first on ties).
    pub best: usize,
    /// Proposal index whose output the gradients refer to.
    pub target: Option<(Target, usize)>,
}

impl WhiteBoxTrace {
    pub fn layer(&self, name: &str) -> Option<&TraceTensor> {
        self.layers.iter().find(|l| l.name == name)
    }

    fn layer_mut(&mut self, name: &str) -> &mut TraceTensor {
        self.layers.iter_mut().find(|l| l.name == name).expect("layer present")
    }

    fn act(&self, name: &str) -> &[f64] {
        &self.layer(name).expect("layer present").activation
    }

    pub fn scores(&self) -> &[f64] {
        self.act("score")
    }

    pub fn logits(&self) -> &[f64] {
        self.act("logit")
    }

    /// The image-level score (maximum stage-2 score).
    pub fn score(&self) -> f64 {
        self.scores()[self.best]
    }

    pub fn gradient(&self, name: &str) -> Option<&[f64]> {
        self.layer(name)?.gradient.as_deref()
    }

    pub fn resolve(&self, target: Target) -> Result<usize> {
        let n = self.proposals.count();
        match target {
            Target::MaxScore => Ok(self.best),
            Target::ProposalScore(i) | Target::ProposalLogit(i) if i < n => Ok(i),
            Target::ProposalScore(i) | Target::ProposalLogit(i) => Err(Error::invalid(format!(
                "target proposal {i} out of range (have {n})"
            ))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct MiniCnn {
    config: DetectorConfig,
    weights: MiniCnnWeights,
    anchors: Vec<BBox>,
}

impl Default for MiniCnn {
    fn default() -> Self {
        MiniCnn::new(DetectorConfig::default(), MiniCnnWeights::default()).expect("default config is valid")
    }
}

// zero-padded 3x3 convolution, skipping zero taps
// copy of a plane with a one-pixel border repeating its edge values
fn pad_replicate(src: &[f64], h: usize, w: usize) -> Vec<f64> {
    let pw = w + 2;
    let mut out = vec![0.0; (h + 2) * pw];
    for py in 0..h + 2 {
        let row = &src[py.saturating_sub(1).min(h - 1) * w..][..w];
        let dst = &mut out[py * pw..(py + 1) * pw];
        dst[1..=w].copy_from_slice(row);
        dst[0] = row[0];
        dst[w + 1] = row[w - 1];
    }
    out
}

// adjoint of pad_replicate: the border ring is summed back onto the edge
fn fold_replicate(padded: &[f64], h: usize, w: usize, dst: &mut [f64]) {
    let pw = w + 2;
    for py in 0..h + 2 {
        let y = py.saturating_sub(1).min(h - 1);
        let src = &padded[py * pw..(py + 1) * pw];
        let row = &mut dst[y * w..(y + 1) * w];
        for (d, v) in row.iter_mut().zip(&src[1..=w]) {
            *d += v;
        }
        row[0] += src[0];
        row[w - 1] += src[w + 1];
    }
}

pub(crate) fn conv3x3(input: &[f64], cin: usize, h: usize, w: usize, weights: &[f64], bias: &[f64], cout: usize) -> Vec<f64> {
    let plane = h * w;
    let pw = w + 2;
    let padded: Vec<Vec<f64>> = input.chunks(plane).take(cin).map(|p| pad_replicate(p, h, w)).collect();
    let mut out = vec![0.0; cout * plane];
    for oc in 0..cout {
        let dst = &mut out[oc * plane..(oc + 1) * plane];
        dst.iter_mut().for_each(|v| *v = bias[oc]);
        for (ic, src) in padded.iter().enumerate() {
            for ky in 0..3 {
                for kx in 0..3 {
                    let wv = weights[((oc * cin + ic) * 3 + ky) * 3 + kx];
                    if wv == 0.0 {
                        continue;
                    }
                    for y in 0..h {
                        let s = &src[(y + ky) * pw + kx..][..w];
                        for (a, b) in dst[y * w..(y + 1) * w].iter_mut().zip(s) {
                            *a += wv * b;
                        }
                    }
                }
            }
        }
    }
    out
}

// adjoint of conv3x3 with respect to its input
pub(crate) fn conv3x3_transpose(grad_out: &[f64], cin: usize, h: usize, w: usize, weights: &[f64], cout: usize) -> Vec<f64> {
    let plane = h * w;
    let pw = w + 2;
    let mut out = vec![0.0; cin * plane];
    let active: Vec<usize> = (0..cout)
        .filter(|oc| grad_out[oc * plane..(oc + 1) * plane].iter().any(|v| *v != 0.0))
        .collect();
    if active.is_empty() {
        return out;
    }
    let mut padded = vec![0.0; (h + 2) * pw];
    for ic in 0..cin {
        padded.iter_mut().for_each(|v| *v = 0.0);
        for &oc in &active {
            let g = &grad_out[oc * plane..(oc + 1) * plane];
            for ky in 0..3 {
                for kx in 0..3 {
                    let wv = weights[((oc * cin + ic) * 3 + ky) * 3 + kx];
                    if wv == 0.0 {
                        continue;
                    }
                    for y in 0..h {
                        let d = &mut padded[(y + ky) * pw + kx..][..w];
                        for (a, b) in d.iter_mut().zip(&g[y * w..(y + 1) * w]) {
                            *a += wv * b;
                        }
                    }
                }
            }
        }
        fold_replicate(&padded, h, w, &mut out[ic * plane..(ic + 1) * plane]);
    }
    out
}

pub(crate) fn maxpool2(input: &[f64], c: usize, h: usize, w: usize) -> (Vec<f64>, Vec<u32>) {
    let (oh, ow) = (h / 2, w / 2);
    let mut out = vec![0.0; c * oh * ow];
    let mut switch = vec![0u32; c * oh * ow];
    for ch in 0..c {
        let src = &input[ch * h * w..(ch + 1) * h * w];
        for y in 0..oh {
            for x in 0..ow {
                let cands = [
                    2 * y * w + 2 * x,
                    2 * y * w + 2 * x + 1,
                    (2 * y + 1) * w + 2 * x,
                    (2 * y + 1) * w + 2 * x + 1,
                ];
                let mut best = cands[0];
                for &k in &cands[1..] {
                    if src[k] > src[best] {
                        best = k;
                    }
                }
                let o = ch * oh * ow + y * ow + x;
                out[o] = src[best];
                switch[o] = best as u32;
            }
        }
    }
    (out, switch)
}

pub(crate) fn unpool2(grad: &[f64], switch: &[u32], c: usize, h: usize, w: usize) -> Vec<f64> {
    let plane_out = (h / 2) * (w / 2);
    let mut out = vec![0.0; c * h * w];
    for ch in 0..c {
        for k in 0..plane_out {
            let o = ch * plane_out + k;
            out[ch * h * w + switch[o] as usize] += grad[o];
        }
    }
    out
}

fn relu(v: &[f64]) -> Vec<f64> {
    v.iter().map(|x| x.max(0.0)).collect()
}

impl MiniCnn {
    pub fn new(config: DetectorConfig, weights: MiniCnnWeights) -> Result<Self> {
        config.validate()?;
        weights.validate()?;
        let anchors = anchor_grid(&config);
        Ok(MiniCnn {
            config,
            weights,
            anchors,
        })
    }

    pub fn with_weights(&self, weights: MiniCnnWeights) -> Result<Self> {
        MiniCnn::new(self.config.clone(), weights)
    }

    pub fn weights(&self) -> &MiniCnnWeights {
        &self.weights
    }

    pub fn dims(&self) -> (usize, usize) {
        self.config.input_size
    }

    /// Forward pass recording every layer. The trace score is the maximum
    /// stage-2 objectness.
    pub fn forward_trace(&self, image: &Image) -> Result<WhiteBoxTrace> {
        check_input(&self.config, image)?;
        let (h, w) = self.config.input_size;
        let (h2, w2) = (h / 2, w / 2);
        let (fh, fw) = self.config.feature_size();
        let wt = &self.weights;

        let input = image.data().to_vec();
        let conv1_pre = conv3x3(&input, 1, h, w, &wt.conv1, &wt.conv1_bias, CONV1_CHANNELS);
        let conv1 = relu(&conv1_pre);
        let (pool1, pool1_switch) = maxpool2(&conv1, CONV1_CHANNELS, h, w);
        let conv2_pre = conv3x3(&pool1, CONV1_CHANNELS, h2, w2, &wt.conv2, &wt.conv2_bias, CONV2_CHANNELS);
        let conv2 = relu(&conv2_pre);
        let (pool2, pool2_switch) = maxpool2(&conv2, CONV2_CHANNELS, h2, w2);

        let cells = fh * fw;
        let mut objectness = vec![0.0; cells];
        for (c, u) in wt.objectness.iter().enumerate() {
            if *u != 0.0 {
                for (o, p) in objectness.iter_mut().zip(&pool2[c * cells..(c + 1) * cells]) {
                    *o += u * p;
                }
            }
        }
        objectness.iter_mut().for_each(|o| *o = sigmoid(*o - wt.objectness_offset));

        let picked = select_proposals(&self.anchors, &objectness, &self.config);
        let sums = FeatureSums::new(&pool2, CONV2_CHANNELS, fh, fw);
        let n = picked.len();
        let mut geometry = Vec::with_capacity(n);
        let mut roi = Vec::with_capacity(n * ROI_FEATURES);
        let mut logits = Vec::with_capacity(n);
        let mut scores = Vec::with_capacity(n);
        for (b, _) in &picked {
            let g = RoiGeometry::new(b, &self.config);
            let f = g.pooled(&sums);
            let z = wt.head_bias + f.iter().zip(&wt.head).map(|(a, b)| a * b).sum::<f64>();
            geometry.push(g);
            roi.extend_from_slice(&f);
            logits.push(z);
            scores.push(sigmoid(z - wt.score_offset));
        }
        let best = crate::imaging::argmax(&scores);
        let proposals = ProposalSet {
            proposals: picked
                .into_iter()
                .map(|(bbox, score)| Detection {
                    bbox,
                    score,
                    stage: Stage::Proposal,
                })
                .collect(),
        };

        let layers = vec![
            TraceTensor::new("input", vec![1, h, w], input),
            TraceTensor::new("conv1_pre", vec![CONV1_CHANNELS, h, w], conv1_pre),
            TraceTensor::new("conv1", vec![CONV1_CHANNELS, h, w], conv1),
            TraceTensor::new("pool1", vec![CONV1_CHANNELS, h2, w2], pool1),
            TraceTensor::new("conv2_pre", vec![CONV2_CHANNELS, h2, w2], conv2_pre),
            TraceTensor::new("conv2", vec![CONV2_CHANNELS, h2, w2], conv2),
            TraceTensor::new("pool2", vec![CONV2_CHANNELS, fh, fw], pool2),
            TraceTensor::new("objectness", vec![1, fh, fw], objectness),
            TraceTensor::new("roi", vec![n, ROI_FEATURES], roi),
            TraceTensor::new("logit", vec![n], logits),
            TraceTensor::new("score", vec![n], scores),
        ];
        Ok(WhiteBoxTrace {
            layers,
            pool1_switch,
            pool2_switch,
            proposals,
            geometry,
            best,
            target: None,
        })
    }

    /// Reverse-mode gradients of the selected scalar with respect to every
    /// recorded tensor, including the input.
    pub fn backward_trace(&self, trace: &WhiteBoxTrace, target: Target) -> Result<WhiteBoxTrace> {
        let t = trace.resolve(target)?;
        let (h, w) = self.config.input_size;
        let (h2, w2) = (h / 2, w / 2);
        let (fh, fw) = self.config.feature_size();
        let n = trace.proposals.count();
        let wt = &self.weights;
        let mut out = trace.clone();

        let mut g_score = vec![0.0; n];
        let mut g_logit = vec![0.0; n];
        match target {
            Target::ProposalLogit(_) => g_logit[t] = 1.0,
            _ => {
                let s = trace.scores()[t];
                g_score[t] = 1.0;
                g_logit[t] = s * (1.0 - s);
            }
        }
        let mut g_roi = vec![0.0; n * ROI_FEATURES];
        for (k, hw) in wt.head.iter().enumerate() {
            g_roi[t * ROI_FEATURES + k] = g_logit[t] * hw;
        }

        let geo = trace.geometry[t];
        let cells = fh * fw;
        let mut g_pool2 = vec![0.0; CONV2_CHANNELS * cells];
        let n_in = geo.inner.count() as f64;
        let n_ring = geo.ring_count();
        for c in 0..CONV2_CHANNELS {
            let gi = g_roi[t * ROI_FEATURES + c] / n_in;
            let gr = if n_ring > 0 {
                g_roi[t * ROI_FEATURES + CONV2_CHANNELS + c] / n_ring as f64
            } else {
                0.0
            };
            for r in geo.context.r0..geo.context.r1 {
                for col in geo.context.c0..geo.context.c1 {
                    g_pool2[c * cells + r * fw + col] += if geo.inner.contains(r, col) { gi } else { gr };
                }
            }
        }

        let g_conv2 = unpool2(&g_pool2, &trace.pool2_switch, CONV2_CHANNELS, h2, w2);
        let g_conv2_pre: Vec<f64> = g_conv2
            .iter()
            .zip(trace.act("conv2_pre"))
            .map(|(g, z)| if *z > 0.0 { *g } else { 0.0 })
            .collect();
        let g_pool1 = conv3x3_transpose(&g_conv2_pre, CONV1_CHANNELS, h2, w2, &wt.conv2, CONV2_CHANNELS);
        let g_conv1 = unpool2(&g_pool1, &trace.pool1_switch, CONV1_CHANNELS, h, w);
        let g_conv1_pre: Vec<f64> = g_conv1
            .iter()
            .zip(trace.act("conv1_pre"))
            .map(|(g, z)| if *z > 0.0 { *g } else { 0.0 })
            .collect();
        let g_input = conv3x3_transpose(&g_conv1_pre, 1, h, w, &wt.conv1, CONV1_CHANNELS);

        let grads: [(&str, Vec<f64>); 11] = [
            ("input", g_input),
            ("conv1_pre", g_conv1_pre),
            ("conv1", g_conv1),
            ("pool1", g_pool1),
            ("conv2_pre", g_conv2_pre),
            ("conv2", g_conv2),
            ("pool2", g_pool2),
            ("objectness", vec![0.0; cells]),
            ("roi", g_roi),
            ("logit", g_logit),
            ("score", g_score),
        ];
        for (name, g) in grads {
            out.layer_mut(name).gradient = Some(g);
        }
        out.target = Some((target, t));
        Ok(out)
    }

    fn outputs(&self, image: &Image) -> Result<StageOutputs> {
        let trace = self.forward_trace(image)?;
        let scores = trace.scores().to_vec();
        Ok(StageOutputs {
            proposals: trace.proposals,
            scores,
        })
    }
}

impl Detector for MiniCnn {
    fn name(&self) -> &str {
        "minicnn"
    }

    fn config(&self) -> &DetectorConfig {
        &self.config
    }

    fn run(&self, image: &Image) -> Result<StageOutputs> {
        self.outputs(image)
    }

    fn white_box(&self) -> Option<&MiniCnn> {
        Some(self)
    }
}
