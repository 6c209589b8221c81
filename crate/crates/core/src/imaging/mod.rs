//! Shared image primitives: boxes, saliency maps, interpolation, Otsu
//! binarization, rendering and the `SAL1` raw format.

mod bbox;
pub mod colormap;
mod image;
mod interp;
pub mod otsu;
mod render;
pub mod sal1;
mod saliency;

pub use bbox::{iou, BBox};
pub use image::Image;
pub use interp::{bilinear_sample, bilinear_upsample};
pub use otsu::{otsu_binarize, otsu_threshold};
pub use render::{encode_png, render_heatmap_overlay};
pub use saliency::{normalize_map, normalize_values, SaliencyMap};
pub(crate) use saliency::argmax;

/// Binary `s x s` cell grid and its upsampled `H x W` soft mask.
#[derive(Debug, Clone, PartialEq)]
pub struct Mask {
    pub grid_size: usize,
    pub grid: Vec<u8>,
    pub upsampled: Vec<f64>,
}
