// `!(x > y)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod detectors;
pub mod error;
pub mod explain;
pub mod gradient;
pub mod harness;
pub mod imaging;
pub mod kv;
pub mod metrics;
pub mod perturbation;
pub mod seeds;
pub mod statistic;

pub use error::{Error, Result};
pub use imaging::{BBox, Image, SaliencyMap};
