use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Axis-aligned box in pixel coordinates, half-open: `[x1, x2) x [y1, y2)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BBox {
    pub x1: usize,
    pub y1: usize,
    pub x2: usize,
    pub y2: usize,
}

impl BBox {
    pub fn new(x1: usize, y1: usize, x2: usize, y2: usize) -> Result<Self> {
        if x1 >= x2 || y1 >= y2 {
            return Err(Error::invalid(format!(
                "box ({x1},{y1},{x2},{y2}) has non-positive area"
            )));
        }
        Ok(BBox { x1, y1, x2, y2 })
    }

    /// Box that must also fit inside a `height x width` raster.
    pub fn within(x1: usize, y1: usize, x2: usize, y2: usize, height: usize, width: usize) -> Result<Self> {
        let b = BBox::new(x1, y1, x2, y2)?;
        if !b.fits(height, width) {
            return Err(Error::invalid(format!(
                "box ({x1},{y1},{x2},{y2}) outside {width}x{height} image"
            )));
        }
        Ok(b)
    }

    pub fn fits(&self, height: usize, width: usize) -> bool {
        self.x2 <= width && self.y2 <= height
    }

    pub fn width(&self) -> usize {
        self.x2 - self.x1
    }

    pub fn height(&self) -> usize {
        self.y2 - self.y1
    }

    pub fn area(&self) -> usize {
        self.width() * self.height()
    }

    /// Geometric midpoint in continuous pixel coordinates.
    pub fn center(&self) -> (f64, f64) {
        (
            (self.x1 + self.x2) as f64 / 2.0,
            (self.y1 + self.y2) as f64 / 2.0,
        )
    }

    pub fn contains(&self, x: usize, y: usize) -> bool {
        x >= self.x1 && x < self.x2 && y >= self.y1 && y < self.y2
    }

    pub fn intersection_area(&self, other: &BBox) -> usize {
        let w = self.x2.min(other.x2).saturating_sub(self.x1.max(other.x1));
        let h = self.y2.min(other.y2).saturating_sub(self.y1.max(other.y1));
        w * h
    }

    pub fn iou(&self, other: &BBox) -> f64 {
        iou(self, other)
    }

    pub fn to_array(&self) -> [usize; 4] {
        [self.x1, self.y1, self.x2, self.y2]
    }
}

/// Intersection over union of two valid boxes.
pub fn iou(a: &BBox, b: &BBox) -> f64 {
    let inter = a.intersection_area(b);
    let union = a.area() + b.area() - inter;
    inter as f64 / union as f64
}
