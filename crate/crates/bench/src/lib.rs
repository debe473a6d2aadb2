//! Criterion benchmarks for the simulation engines, over the re-exported core API.

pub use glesens_core::*;
