use crate::error::{Error, Result};
use crate::kv;

/// Detector settings shared by every detector implementation.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectorConfig {
    /// `(height, width)` in pixels; both multiples of the feature stride.
    pub input_size: (usize, usize),
    /// Anchor side lengths (square-root of the anchor area) in pixels.
    pub anchor_scales: Vec<f64>,
    /// Anchor width / height ratios.
    pub anchor_ratios: Vec<f64>,
    pub score_threshold: f64,
    pub nms_iou: f64,
    pub proposal_count: usize,
}

pub const FEATURE_STRIDE: usize = 4;

impl Default for DetectorConfig {
    fn default() -> Self {
        DetectorConfig {
            input_size: (128, 128),
            anchor_scales: vec![16.0, 22.0, 28.0],
            anchor_ratios: vec![1.0, 1.5],
            score_threshold: 0.5,
            nms_iou: 0.5,
            proposal_count: 300,
        }
    }
}

impl DetectorConfig {
    pub fn validate(&self) -> Result<()> {
        let (h, w) = self.input_size;
        if h < 2 * FEATURE_STRIDE || w < 2 * FEATURE_STRIDE || h % FEATURE_STRIDE != 0 || w % FEATURE_STRIDE != 0 {
            return Err(Error::Config(format!(
                "input size {h}x{w} must be a multiple of {FEATURE_STRIDE} and at least {}",
                2 * FEATURE_STRIDE
            )));
        }
        if self.anchor_scales.is_empty() || self.anchor_scales.iter().any(|s| !(*s >= 1.0)) {
            return Err(Error::Config("anchor scales must be >= 1 pixel".into()));
        }
        if self.anchor_ratios.is_empty() || self.anchor_ratios.iter().any(|r| !(*r > 0.0)) {
            return Err(Error::Config("anchor ratios must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.score_threshold) || !(0.0..=1.0).contains(&self.nms_iou) {
            return Err(Error::Config("score threshold and NMS IoU must lie in [0,1]".into()));
        }
        if self.proposal_count == 0 {
            return Err(Error::Config("proposal count must be positive".into()));
        }
        Ok(())
    }

    pub fn feature_size(&self) -> (usize, usize) {
        (self.input_size.0 / FEATURE_STRIDE, self.input_size.1 / FEATURE_STRIDE)
    }

    /// Parses the key-value detector config; unspecified keys keep defaults.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = DetectorConfig::default();
        for (k, v) in kv::parse(text)? {
            match k.as_str() {
                "input_size" => {
                    cfg.input_size = match v.split_once('x') {
                        Some((h, w)) => (kv::number(&k, h.trim())?, kv::number(&k, w.trim())?),
                        None => {
                            let s = kv::number(&k, &v)?;
                            (s, s)
                        }
                    }
                }
                "anchor_scales" => cfg.anchor_scales = kv::list(&k, &v)?,
                "anchor_ratios" => cfg.anchor_ratios = kv::list(&k, &v)?,
                "score_threshold" => cfg.score_threshold = kv::number(&k, &v)?,
                "nms_iou" => cfg.nms_iou = kv::number(&k, &v)?,
                "proposal_count" => cfg.proposal_count = kv::number(&k, &v)?,
                other => return Err(Error::Config(format!("unknown detector config key `{other}`"))),
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_text(&self) -> String {
        let join = |v: &[f64]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",");
        format!(
            "input_size = {}x{}\nanchor_scales = {}\nanchor_ratios = {}\nscore_threshold = {}\nnms_iou = {}\nproposal_count = {}\n",
            self.input_size.0,
            self.input_size.1,
            join(&self.anchor_scales),
            join(&self.anchor_ratios),
            self.score_threshold,
            self.nms_iou,
            self.proposal_count
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn text_roundtrip() {
        let cfg = DetectorConfig {
            score_threshold: 0.4,
            proposal_count: 120,
            ..Default::default()
        };
        assert_eq!(DetectorConfig::parse(&cfg.to_text()).unwrap(), cfg);
    }

    #[test]
    fn rejects_bad_values() {
        assert!(DetectorConfig::parse("input_size = 130").is_err());
        assert!(DetectorConfig::parse("nms_iou = 1.5").is_err());
        assert!(DetectorConfig::parse("frobnicate = 1").is_err());
        assert_eq!(DetectorConfig::parse("input_size = 64x96").unwrap().input_size, (64, 96));
    }
}
