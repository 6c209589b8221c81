use crate::error::{Error, Result};
use crate::imaging::BBox;

/// Non-negative per-pixel attribution aligned with an [`crate::Image`].
#[derive(Debug, Clone, PartialEq)]
pub struct SaliencyMap {
    pub height: usize,
    pub width: usize,
    pub values: Vec<f64>,
    pub method: String,
    /// Only set for per-box explanations.
    pub target_box: Option<BBox>,
    pub warning: Option<String>,
}

impl SaliencyMap {
    pub fn new(height: usize, width: usize, values: Vec<f64>, method: impl Into<String>) -> Result<Self> {
        if values.len() != height * width {
            return Err(Error::invalid(format!(
                "saliency has {} values, expected {}x{}",
                values.len(),
                height,
                width
            )));
        }
        if let Some(v) = values.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::Numeric(format!("saliency value {v} is not finite and non-negative")));
        }
        Ok(SaliencyMap {
            height,
            width,
            values,
            method: method.into(),
            target_box: None,
            warning: None,
        })
    }

    pub fn zeros(height: usize, width: usize, method: impl Into<String>) -> Self {
        SaliencyMap {
            height,
            width,
            values: vec![0.0; height * width],
            method: method.into(),
            target_box: None,
            warning: None,
        }
    }

    pub fn with_target(mut self, target: BBox) -> Self {
        self.target_box = Some(target);
        self
    }

    pub fn with_warning(mut self, warning: impl Into<String>) -> Self {
        self.warning = Some(warning.into());
        self
    }

    pub fn get(&self, y: usize, x: usize) -> f64 {
        self.values[y * self.width + x]
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    pub fn total(&self) -> f64 {
        self.values.iter().sum()
    }

    /// First row-major position of the largest value, as `(y, x)`.
    pub fn argmax(&self) -> (usize, usize) {
        let idx = argmax(&self.values);
        (idx / self.width, idx % self.width)
    }

    pub fn scaled(&self, factor: f64) -> Result<SaliencyMap> {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= factor);
        SaliencyMap::new(out.height, out.width, out.values, out.method).map(|mut m| {
            m.target_box = self.target_box;
            m
        })
    }
}

pub(crate) fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

/// Min-max scales values into `[0, 1]`; a constant map becomes all zeros.
pub fn normalize_values(values: &[f64]) -> Vec<f64> {
    let (lo, hi) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(*v), hi.max(*v)));
    let range = hi - lo;
    if !(range > 0.0) {
        return vec![0.0; values.len()];
    }
    values.iter().map(|v| (v - lo) / range).collect()
}

pub fn normalize_map(s: &SaliencyMap) -> SaliencyMap {
    SaliencyMap {
        values: normalize_values(&s.values),
        ..s.clone()
    }
}
