//! Stage-1 explainers: Gaussian KDE over proposal centers with the PCKDE
//! consistency grade, and the proposal Density Map.

mod density;
mod kde;
mod report;

pub use density::{count_boxes, density_map, DensityMapResult};
pub use kde::{
    fit_centers, fit_kde, kde_density, pckde, silverman, Bandwidth, DensityEstimate, KdeModel, PckdeMode, PckdeResult,
    CONSISTENCY_THRESHOLD, MIN_AUTO_BANDWIDTH,
};
pub use report::{border_fraction, negative_case_report, NegativeCaseReport, DEFAULT_BORDER_BAND};
