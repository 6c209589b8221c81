use crate::detectors::anchors::{anchor_grid, select_proposals, FeatureSums, RoiGeometry};
use crate::detectors::{check_input, sigmoid, Detection, Detector, DetectorConfig, ProposalSet, Stage, StageOutputs, FEATURE_STRIDE};
use crate::error::Result;
use crate::imaging::{BBox, Image};

/// Gradient-free detector working directly on cell-averaged intensities.
///
/// Stage 1 scores each feature cell by its 3x3-cell neighbourhood mean;
/// stage 2 scores a box by inside mean minus a fraction of its ring mean.
/// Shift-invariant on constant input.
#[derive(Debug, Clone)]
pub struct SyntheticDetector {
    config: DetectorConfig,
    anchors: Vec<BBox>,
    pub objectness_gain: f64,
    pub objectness_level: f64,
    pub ring_weight: f64,
    pub score_gain: f64,
    pub score_level: f64,
}

impl Default for SyntheticDetector {
    fn default() -> Self {
        SyntheticDetector::new(DetectorConfig::default()).expect("default config is valid")
    }
}

impl SyntheticDetector {
    pub fn new(config: DetectorConfig) -> Result<Self> {
        config.validate()?;
        let anchors = anchor_grid(&config);
        Ok(SyntheticDetector {
            config,
            anchors,
            objectness_gain: 20.0,
            objectness_level: 0.6,
            ring_weight: 0.6,
            score_gain: 25.0,
            score_level: 0.42,
        })
    }

    fn cell_means(&self, image: &Image) -> Vec<f64> {
        let (fh, fw) = self.config.feature_size();
        let w = image.width();
        let mut out = vec![0.0; fh * fw];
        for (y, row) in image.data().chunks(w).enumerate() {
            for (x, v) in row.iter().enumerate() {
                out[(y / FEATURE_STRIDE) * fw + x / FEATURE_STRIDE] += v;
            }
        }
        let n = (FEATURE_STRIDE * FEATURE_STRIDE) as f64;
        out.iter_mut().for_each(|v| *v /= n);
        out
    }

    fn objectness(&self, cells: &[f64]) -> Vec<f64> {
        let (fh, fw) = self.config.feature_size();
        let mut out = vec![0.0; fh * fw];
        for r in 0..fh {
            for c in 0..fw {
                // zero padding outside the grid, always divide by 9
                let mut acc = 0.0;
                for rr in r.saturating_sub(1)..(r + 2).min(fh) {
                    for cc in c.saturating_sub(1)..(c + 2).min(fw) {
                        acc += cells[rr * fw + cc];
                    }
                }
                out[r * fw + c] = sigmoid(self.objectness_gain * (acc / 9.0 - self.objectness_level));
            }
        }
        out
    }
}

impl Detector for SyntheticDetector {
    fn name(&self) -> &str {
        "synthetic"
    }

    fn config(&self) -> &DetectorConfig {
        &self.config
    }

    fn run(&self, image: &Image) -> Result<StageOutputs> {
        check_input(&self.config, image)?;
        let (fh, fw) = self.config.feature_size();
        let cells = self.cell_means(image);
        let picked = select_proposals(&self.anchors, &self.objectness(&cells), &self.config);
        let sums = FeatureSums::new(&cells, 1, fh, fw);
        let scores = picked
            .iter()
            .map(|(b, _)| {
                let f = RoiGeometry::new(b, &self.config).pooled(&sums);
                sigmoid(self.score_gain * (f[0] - self.ring_weight * f[1] - self.score_level))
            })
            .collect();
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
        Ok(StageOutputs { proposals, scores })
    }
}
