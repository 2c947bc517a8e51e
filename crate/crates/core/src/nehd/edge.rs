//! Edge-descriptor layer: a bank of edge filters plus a thresholded "no-edge" map.

use ndarray::{s, Array1, Array3, Array4, ArrayView2, ArrayView3, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::conv::{conv2d_backward, conv2d_forward, FilterBank, Padding};
use super::{FeatureMaps, Provenance};
use crate::error::{Error, Result};

/// 3x3 Sobel kernels at 0, 45, 90 and 135 degrees.
pub const SOBEL: [[[f64; 3]; 3]; 4] = [
    [[-1.0, 0.0, 1.0], [-2.0, 0.0, 2.0], [-1.0, 0.0, 1.0]],
    [[-2.0, -1.0, 0.0], [-1.0, 0.0, 1.0], [0.0, 1.0, 2.0]],
    [[-1.0, -2.0, -1.0], [0.0, 0.0, 0.0], [1.0, 2.0, 1.0]],
    [[0.0, -1.0, -2.0], [1.0, 0.0, -1.0], [2.0, 1.0, 0.0]],
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode")]
pub enum EdgeInit {
    /// Sobel orientations; a count of 8 adds the negated polarities.
    Sobel,
    /// Uniform in `[-a, a]` with `a = sqrt(1 / (M N))`, then mean-subtracted per kernel.
    Random { kernel: usize },
}

/// Learnable edge filters and the 1x1 no-edge block.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeParams {
    /// `[B, 1, M, N]`
    pub edge_filters: FilterBank,
    /// `[1, B, 1, 1]` with bias; followed by a logistic sigmoid.
    pub noedge: FilterBank,
}

/// Intermediate activations kept for the backward pass.
#[derive(Debug, Clone)]
pub struct EdgeCache {
    input: Array3<f64>,
    edges: Array3<f64>,
    noedge: Array3<f64>,
}

#[derive(Debug, Clone)]
pub struct EdgeGrads {
    pub input: Array3<f64>,
    pub edge_weights: Array4<f64>,
    pub edge_bias: Option<Array1<f64>>,
    pub noedge_weights: Array4<f64>,
    pub noedge_bias: Array1<f64>,
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Build an edge bank of `count` filters. `seed` drives the random filters and the no-edge
/// weights (uniform in `[-1/sqrt(B), 1/sqrt(B)]`, bias zero).
pub fn init_edge_filters(mode: EdgeInit, count: usize, seed: u64) -> Result<EdgeParams> {
    if count == 0 {
        return Err(Error::config("edge filter count must be positive"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let edge_filters = match mode {
        EdgeInit::Sobel => {
            if count != 4 && count != 8 {
                return Err(Error::config(format!("sobel initialization supports 4 or 8 filters, got {count}")));
            }
            let w = Array4::from_shape_fn((count, 1, 3, 3), |(k, _, m, n)| {
                let sign = if k < 4 { 1.0 } else { -1.0 };
                sign * SOBEL[k % 4][m][n]
            });
            FilterBank::new(w, None, Padding::SameZero)?
        }
        EdgeInit::Random { kernel } => {
            if kernel % 2 == 0 {
                return Err(Error::config(format!("kernel size {kernel} must be odd")));
            }
            let a = (1.0 / (kernel * kernel) as f64).sqrt();
            let mut w = Array4::from_shape_simple_fn((count, 1, kernel, kernel), || rng.random_range(-a..=a));
            for mut k in w.outer_iter_mut() {
                let mean = k.mean().unwrap_or(0.0);
                k.mapv_inplace(|v| v - mean);
            }
            FilterBank::new(w, Some(Array1::zeros(count)), Padding::SameZero)?
        }
    };
    let limit = 1.0 / (count as f64).sqrt();
    let v = Array4::from_shape_simple_fn((1, count, 1, 1), || rng.random_range(-limit..=limit));
    let noedge = FilterBank::new(v, Some(Array1::zeros(1)), Padding::SameZero)?;
    Ok(EdgeParams { edge_filters, noedge })
}

impl EdgeParams {
    pub fn edges(&self) -> usize {
        self.edge_filters.filters()
    }

    pub fn output_channels(&self) -> usize {
        self.edges() + 1
    }

    pub fn num_parameters(&self) -> usize {
        self.edge_filters.num_parameters() + self.noedge.num_parameters()
    }

    /// `B` edge maps followed by `sigmoid(noedge(edges))`; `B + 1` channels, same spatial size.
    pub fn forward_cached(&self, x: ArrayView3<f64>) -> Result<(Array3<f64>, EdgeCache)> {
        if x.dim().0 != 1 {
            return Err(Error::shape(format!("edge block expects 1 input channel, got {}", x.dim().0)));
        }
        let edges = conv2d_forward(x, &self.edge_filters)?;
        let noedge = conv2d_forward(edges.view(), &self.noedge)?.mapv_into(sigmoid);
        let out = ndarray::concatenate(Axis(0), &[edges.view(), noedge.view()]).expect("same spatial dims");
        Ok((out, EdgeCache { input: x.to_owned(), edges, noedge }))
    }

    pub fn forward(&self, x: ArrayView3<f64>) -> Result<Array3<f64>> {
        Ok(self.forward_cached(x)?.0)
    }

    pub fn backward(&self, cache: &EdgeCache, upstream: ArrayView3<f64>) -> Result<EdgeGrads> {
        let b = self.edges();
        let (_, rows, cols) = cache.edges.dim();
        if upstream.dim() != (b + 1, rows, cols) {
            return Err(Error::shape(format!("upstream {:?} vs edge output {:?}", upstream.dim(), (b + 1, rows, cols))));
        }
        let g_noedge = upstream.slice(s![b..b + 1, .., ..]);
        let g_z = &g_noedge * &cache.noedge.mapv(|s| s * (1.0 - s));
        let ne = conv2d_backward(cache.edges.view(), &self.noedge, g_z.view())?;
        let g_edges = &upstream.slice(s![0..b, .., ..]) + &ne.input;
        let ed = conv2d_backward(cache.input.view(), &self.edge_filters, g_edges.view())?;
        Ok(EdgeGrads {
            input: ed.input,
            edge_weights: ed.weights,
            edge_bias: ed.bias,
            noedge_weights: ne.weights,
            noedge_bias: ne.bias.expect("no-edge block has a bias"),
        })
    }
}

/// Run the edge block on a single-channel spectrogram plane.
pub fn edge_block_forward(spec: ArrayView2<f64>, p: &EdgeParams) -> Result<FeatureMaps> {
    let x = spec.insert_axis(Axis(0));
    Ok(FeatureMaps { values: p.forward(x)?, provenance: Provenance::Concatenated })
}
