use serde::Serialize;

use crate::detectors::Detector;
use crate::error::{Error, Result};
use crate::imaging::{Image, SaliencyMap};

/// Confidence change when the explanation is used as the input.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Faithfulness {
    /// `max(0, y - o) / y * 100`.
    pub drop: f64,
    /// `o > y`.
    pub increased: bool,
    pub original: f64,
    pub explained: f64,
}

/// The image weighted by `s / max(s)`; a zero map blanks the image.
pub fn explanation_as_input(image: &Image, s: &SaliencyMap) -> Result<Image> {
    if (s.height, s.width) != image.dims() {
        return Err(Error::invalid("saliency and image sizes differ"));
    }
    let max = s.max();
    let weights: Vec<f64> = if max > 0.0 {
        s.values.iter().map(|v| v / max).collect()
    } else {
        vec![0.0; s.values.len()]
    };
    image.masked(&weights)
}

/// Drop and Increase against the detector's image-level score. `None` when
/// the original score is 0.
pub fn drop_increase<D: Detector + ?Sized>(detector: &D, image: &Image, s: &SaliencyMap) -> Result<Option<Faithfulness>> {
    let y = detector.score(image)?;
    drop_increase_from(detector, y, image, s)
}

/// As [`drop_increase`] with the original score already known.
pub fn drop_increase_from<D: Detector + ?Sized>(
    detector: &D,
    original: f64,
    image: &Image,
    s: &SaliencyMap,
) -> Result<Option<Faithfulness>> {
    if !(original > 0.0) {
        return Ok(None);
    }
    let o = detector.score(&explanation_as_input(image, s)?)?;
    Ok(Some(Faithfulness {
        drop: ((original - o).max(0.0) / original * 100.0).min(100.0),
        increased: o > original,
        original,
        explained: o,
    }))
}
