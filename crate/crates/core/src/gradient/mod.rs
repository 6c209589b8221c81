//! Explanations that read the white-box detector's internals.

pub mod adasise;
pub mod cam;
pub mod lrp;

pub use adasise::{adasise, gate_channels, layer_attribution, LayerAttribution, DEFAULT_LAYERS};
pub use cam::{gradcam, gradcampp, gradcampp_weights, mean_gradient_weights, weighted_sum_maps, CAM_LAYER};
pub use lrp::{lrp_dense, lrp_epsilon, RelevanceField};
