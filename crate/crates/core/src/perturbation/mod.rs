//! Black-box explainers that only query detector outputs: RISE, D-RISE and
//! LIME with its SLIC segmentation and LASSO surrogate.
//!
//! Detector queries run on the rayon pool; every reduction happens in
//! sample order afterwards, so maps are identical for any thread count.

pub mod lasso;
mod lime;
mod rise;
mod slic;

pub use lime::{cosine_distance_to_ones, lime, lime_with_segments, occlude, LimeConfig, SurrogateModel};
pub use rise::{
    drise, drise_many, drise_with_masks, generate_masks, iou_score, rise, rise_with_masks, weighted_sum, RiseConfig,
    Similarity,
};
pub use slic::{slic, Superpixels, INTENSITY_SCALE};
