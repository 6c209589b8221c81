//! Detector contracts and the two shipped detectors: a white-box miniature
//! CNN ([`MiniCnn`]) and a gradient-free intensity detector
//! ([`SyntheticDetector`]), plus the synthetic scene generator.

pub mod anchors;
mod config;
pub mod dataset;
pub mod minicnn;
mod nms;
mod scene;
mod synthetic;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imaging::{BBox, Image};

pub use config::{DetectorConfig, FEATURE_STRIDE};
pub use minicnn::{MiniCnn, MiniCnnWeights, Target, TraceTensor, WhiteBoxTrace};
pub use nms::nms;
pub use scene::{generate_scene, SyntheticScene};
pub use synthetic::SyntheticDetector;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Proposal,
    Final,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub bbox: BBox,
    pub score: f64,
    pub stage: Stage,
}

/// Unsuppressed, unthresholded stage-1 output.
#[derive(Debug, Clone, PartialEq)]
pub struct ProposalSet {
    pub proposals: Vec<Detection>,
}

impl ProposalSet {
    pub fn count(&self) -> usize {
        self.proposals.len()
    }

    pub fn boxes(&self) -> impl Iterator<Item = &BBox> {
        self.proposals.iter().map(|d| &d.bbox)
    }
}

/// Both stages of one detector pass: proposals and their stage-2 scores.
#[derive(Debug, Clone)]
pub struct StageOutputs {
    pub proposals: ProposalSet,
    pub scores: Vec<f64>,
}

impl StageOutputs {
    /// Image-level confidence: the largest stage-2 score.
    pub fn max_score(&self) -> f64 {
        self.scores.iter().copied().fold(0.0, f64::max)
    }
}

/// A two-stage detector. Implementations must be free of interior
/// mutation so they can be shared across worker threads.
pub trait Detector: Send + Sync {
    fn name(&self) -> &str;

    fn config(&self) -> &DetectorConfig;

    /// Runs stage 1 and stage 2.
    fn run(&self, image: &Image) -> Result<StageOutputs>;

    fn proposals(&self, image: &Image) -> Result<ProposalSet> {
        Ok(self.run(image)?.proposals)
    }

    /// Stage-2 rescoring, score threshold and greedy NMS, sorted by
    /// descending score. Empty for negative images.
    fn detect(&self, image: &Image) -> Result<Vec<Detection>> {
        let out = self.run(image)?;
        Ok(finalize(&out, self.config()))
    }

    /// Image-level "contains a nodule" confidence (max stage-2 score).
    fn score(&self, image: &Image) -> Result<f64> {
        Ok(self.run(image)?.max_score())
    }

    /// Gradient access, when the detector is white-box.
    fn white_box(&self) -> Option<&MiniCnn> {
        None
    }
}

pub(crate) fn finalize(out: &StageOutputs, cfg: &DetectorConfig) -> Vec<Detection> {
    let candidates = out
        .proposals
        .proposals
        .iter()
        .zip(&out.scores)
        .filter(|(_, s)| **s >= cfg.score_threshold)
        .map(|(p, s)| Detection {
            bbox: p.bbox,
            score: *s,
            stage: Stage::Final,
        })
        .collect();
    nms(candidates, cfg.nms_iou)
}

pub(crate) fn check_input(cfg: &DetectorConfig, image: &Image) -> Result<()> {
    if image.dims() != cfg.input_size {
        return Err(Error::invalid(format!(
            "image is {}x{}, detector expects {}x{}",
            image.height(),
            image.width(),
            cfg.input_size.0,
            cfg.input_size.1
        )));
    }
    Ok(())
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}
