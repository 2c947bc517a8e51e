//! Differentiable edge-histogram texture layers with hand-derived backward passes.

pub mod checkpoint;
mod conv;
mod edge;
mod histogram;
mod pool;

use ndarray::Array3;

pub use pool::{avg_pool, avg_pool_backward};
pub use conv::{conv2d_backward, conv2d_forward, ConvGrads, FilterBank, Padding};
pub use edge::{edge_block_forward, init_edge_filters, EdgeCache, EdgeGrads, EdgeInit, EdgeParams, SOBEL};
pub use histogram::{
    histogram_forward, init_histogram, HistCache, HistGrads, HistInit, HistogramParams, PoolWindow, Wiring,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    Edge,
    NoEdge,
    Concatenated,
}

/// Stack of same-size feature planes, `[channels, rows, cols]`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMaps {
    pub values: Array3<f64>,
    pub provenance: Provenance,
}
