//! Command implementations behind the `detxplain` binary.

mod commands;
mod config;
mod output;

pub use commands::{benchmark, explain, gen_data, map_stems, render, with_workers, ImageReport};
pub use config::{DetectorKind, RunConfig};
pub use output::{OutputDir, INCOMPLETE_MARKER};
