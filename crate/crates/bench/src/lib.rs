//! Shared fixtures for the benchmarks.

use smiley_core::tessim::generate_dataset;
use smiley_core::{Dataset, SimConfig};

/// The default 500-round, k = 7 dataset.
pub fn default_dataset() -> Dataset {
    generate_dataset(&SimConfig::default()).expect("default config is valid")
}
