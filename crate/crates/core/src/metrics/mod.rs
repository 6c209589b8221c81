//! Plausibility (EBPG, IoU, Bbox) and faithfulness (Drop, Increase)
//! metrics, and the dataset benchmark built on them.

mod benchmark;
mod faithfulness;
mod plausibility;

pub use benchmark::{
    run_benchmark, run_benchmark_with, ImageResult, MethodAggregate, Metric, MetricReport, MetricRow, CSV_HEADER,
};
pub use faithfulness::{drop_increase, drop_increase_from, explanation_as_input, Faithfulness};
pub use plausibility::{bbox_metric, ebpg, explanation_box, iou_metric, union_mask};
