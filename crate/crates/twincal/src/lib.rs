//! Experiment harness for `twincal-core`: scene presets, dataset and
//! checkpoint files, the benchmark suite, heatmaps, timings, and the CLI.

pub mod bench;
pub mod cli;
pub mod dataset;
pub mod error;
pub mod experiment;
pub mod formats;
pub mod heatmap;
pub mod presets;

pub use error::{Error, Result};
