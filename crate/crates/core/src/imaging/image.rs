use crate::error::{Error, Result};

/// Single-channel intensity image, row-major, values in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    height: usize,
    width: usize,
    data: Vec<f64>,
}

impl Image {
    pub fn new(height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::invalid("image dimensions must be positive"));
        }
        if data.len() != height * width {
            return Err(Error::invalid(format!(
                "image data has {} values, expected {}x{}",
                data.len(),
                height,
                width
            )));
        }
        if let Some(v) = data.iter().find(|v| !(v.is_finite() && (0.0..=1.0).contains(*v))) {
            return Err(Error::invalid(format!("intensity {v} outside [0,1]")));
        }
        Ok(Image {
            height,
            width,
            data,
        })
    }

    pub fn filled(height: usize, width: usize, value: f64) -> Result<Self> {
        Image::new(height, width, vec![value; height * width])
    }

    /// Builds an image from arbitrary finite values, clamping into `[0, 1]`.
    pub fn from_clamped(height: usize, width: usize, mut data: Vec<f64>) -> Result<Self> {
        for v in &mut data {
            *v = if v.is_nan() { 0.0 } else { v.clamp(0.0, 1.0) };
        }
        Image::new(height, width, data)
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn get(&self, y: usize, x: usize) -> f64 {
        self.data[y * self.width + x]
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }

    /// Pointwise product with a weight map whose values lie in `[0, 1]`.
    pub fn masked(&self, weights: &[f64]) -> Result<Image> {
        if weights.len() != self.data.len() {
            return Err(Error::invalid("mask size does not match image"));
        }
        let data = self
            .data
            .iter()
            .zip(weights)
            .map(|(v, w)| v * w)
            .collect();
        Image::from_clamped(self.height, self.width, data)
    }

    /// Rounds every value to the nearest 8-bit level.
    pub fn quantized(&self) -> Image {
        let data = self
            .data
            .iter()
            .map(|v| (v * 255.0).round() / 255.0)
            .collect();
        Image {
            height: self.height,
            width: self.width,
            data,
        }
    }

    pub fn to_gray8(&self) -> Vec<u8> {
        self.data
            .iter()
            .map(|v| (v * 255.0).round().clamp(0.0, 255.0) as u8)
            .collect()
    }

    pub fn from_gray8(height: usize, width: usize, bytes: &[u8]) -> Result<Image> {
        Image::new(height, width, bytes.iter().map(|&b| b as f64 / 255.0).collect())
    }
}
