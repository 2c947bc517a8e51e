//! Soft-binning histogram layer.
//!
//! Each bin `b` has a centre `mu` and a width `gamma`; the membership of a value `u` is
//! `exp(-gamma^2 (u - mu)^2)`, averaged over non-overlapping `S x T` windows. Two wirings are
//! supported:
//!
//! * [`Wiring::Mixed`]: a learnable 1x1 mix `u_b = sum_k a_bk x_k` feeds bin `b`, giving exactly
//!   `bins` output maps.
//! * [`Wiring::PerChannel`]: every input channel `k` gets its own `bins` bins with centres
//!   `mu_bk` and widths `gamma_bk`, giving `channels * bins` maps ordered channel-major.

use ndarray::{Array2, Array3, ArrayView3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Wiring {
    Mixed,
    PerChannel,
}

/// Averaging window (rows x cols); stride equals the window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PoolWindow {
    pub rows: usize,
    pub cols: usize,
}

impl PoolWindow {
    pub fn new(rows: usize, cols: usize) -> Self {
        PoolWindow { rows, cols }
    }

    pub fn output_dims(&self, rows: usize, cols: usize) -> Result<(usize, usize)> {
        if self.rows == 0 || self.cols == 0 {
            return Err(Error::config("pooling window must be non-empty"));
        }
        if self.rows > rows || self.cols > cols {
            return Err(Error::config(format!(
                "pooling window {}x{} larger than feature plane {rows}x{cols}",
                self.rows, self.cols
            )));
        }
        Ok((rows / self.rows, cols / self.cols))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode")]
pub enum HistInit {
    /// Centres evenly spaced over `[lo, hi]` (endpoints included; a single bin sits at the
    /// midpoint), widths `bins / (hi - lo)`.
    UniformRange { lo: f64, hi: f64 },
    /// Centres drawn from `U[lo, hi]`, widths as above.
    Random { lo: f64, hi: f64, seed: u64 },
}

impl Default for HistInit {
    fn default() -> Self {
        HistInit::UniformRange { lo: -3.0, hi: 3.0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HistogramParams {
    /// `[bins, in_channels]` for [`Wiring::Mixed`], absent for [`Wiring::PerChannel`].
    pub mixing: Option<Array2<f64>>,
    /// `[bins, k]` where `k` is 1 when mixed and `in_channels` per channel.
    pub centers: Array2<f64>,
    /// Same shape as `centers`. Only the square enters the layer, so the sign is free.
    pub widths: Array2<f64>,
    pub pool: PoolWindow,
}

#[derive(Debug, Clone)]
pub struct HistCache {
    input: Array3<f64>,
    /// Mixed inputs `u_b`, present only for the mixed wiring.
    mixed: Option<Array3<f64>>,
}

#[derive(Debug, Clone)]
pub struct HistGrads {
    pub input: Array3<f64>,
    pub mixing: Option<Array2<f64>>,
    pub centers: Array2<f64>,
    pub widths: Array2<f64>,
}

pub fn init_histogram(bins: usize, in_channels: usize, wiring: Wiring, init: HistInit, pool: PoolWindow) -> Result<HistogramParams> {
    if bins == 0 {
        return Err(Error::config("histogram needs at least one bin"));
    }
    if in_channels == 0 {
        return Err(Error::config("histogram needs at least one input channel"));
    }
    let (lo, hi) = match init {
        HistInit::UniformRange { lo, hi } | HistInit::Random { lo, hi, .. } => (lo, hi),
    };
    if !lo.is_finite() || !hi.is_finite() || hi <= lo {
        return Err(Error::config(format!("bin range [{lo}, {hi}] is empty")));
    }
    let k = match wiring {
        Wiring::Mixed => 1,
        Wiring::PerChannel => in_channels,
    };
    let centers_1d: Vec<f64> = match init {
        HistInit::UniformRange { .. } if bins == 1 => vec![0.5 * (lo + hi)],
        HistInit::UniformRange { .. } => (0..bins).map(|b| lo + (hi - lo) * b as f64 / (bins - 1) as f64).collect(),
        HistInit::Random { seed, .. } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..bins).map(|_| rng.random_range(lo..=hi)).collect()
        }
    };
    let width = bins as f64 / (hi - lo);
    Ok(HistogramParams {
        mixing: match wiring {
            Wiring::Mixed => Some(Array2::from_elem((bins, in_channels), 1.0 / in_channels as f64)),
            Wiring::PerChannel => None,
        },
        centers: Array2::from_shape_fn((bins, k), |(b, _)| centers_1d[b]),
        widths: Array2::from_elem((bins, k), width),
        pool,
    })
}

impl HistogramParams {
    pub fn bins(&self) -> usize {
        self.centers.nrows()
    }

    pub fn wiring(&self) -> Wiring {
        if self.mixing.is_some() {
            Wiring::Mixed
        } else {
            Wiring::PerChannel
        }
    }

    pub fn in_channels(&self) -> usize {
        match &self.mixing {
            Some(a) => a.ncols(),
            None => self.centers.ncols(),
        }
    }

    pub fn output_channels(&self) -> usize {
        match self.wiring() {
            Wiring::Mixed => self.bins(),
            Wiring::PerChannel => self.bins() * self.in_channels(),
        }
    }

    pub fn num_parameters(&self) -> usize {
        self.mixing.as_ref().map_or(0, |a| a.len()) + self.centers.len() + self.widths.len()
    }

    pub fn output_dims(&self, rows: usize, cols: usize) -> Result<(usize, usize)> {
        self.pool.output_dims(rows, cols)
    }

    fn check(&self, x: &ArrayView3<f64>) -> Result<()> {
        if x.dim().0 != self.in_channels() {
            return Err(Error::shape(format!(
                "histogram expects {} input channels, got {}",
                self.in_channels(),
                x.dim().0
            )));
        }
        if self.centers.dim() != self.widths.dim() {
            return Err(Error::shape("centre and width tensors differ in shape"));
        }
        Ok(())
    }

    /// For output map `o`: which plane of the (possibly mixed) input it reads and which
    /// `(bin, column)` of the centre/width tensors it uses.
    fn route(&self, o: usize) -> (usize, usize, usize) {
        match self.wiring() {
            Wiring::Mixed => (o, o, 0),
            Wiring::PerChannel => {
                let (k, b) = (o / self.bins(), o % self.bins());
                (k, b, k)
            }
        }
    }

    fn mix(&self, x: ArrayView3<f64>) -> Option<Array3<f64>> {
        let a = self.mixing.as_ref()?;
        let (c, r, w) = x.dim();
        let flat = x.as_standard_layout().into_shape_with_order((c, r * w)).expect("contiguous").to_owned();
        Some(a.dot(&flat).into_shape_with_order((a.nrows(), r, w)).expect("sizes agree"))
    }

    pub fn forward_cached(&self, x: ArrayView3<f64>) -> Result<(Array3<f64>, HistCache)> {
        self.check(&x)?;
        let (_, rows, cols) = x.dim();
        let (out_r, out_c) = self.output_dims(rows, cols)?;
        let mixed = self.mix(x.view());
        let planes = mixed.as_ref().map_or(x.view(), |m| m.view());
        let (s, t) = (self.pool.rows, self.pool.cols);
        let scale = 1.0 / (s * t) as f64;

        let mut out = Array3::zeros((self.output_channels(), out_r, out_c));
        for o in 0..self.output_channels() {
            let (plane, b, k) = self.route(o);
            let (mu, g2) = (self.centers[[b, k]], self.widths[[b, k]].powi(2));
            for pr in 0..out_r {
                for pc in 0..out_c {
                    let mut acc = 0.0;
                    for r in pr * s..(pr + 1) * s {
                        for c in pc * t..(pc + 1) * t {
                            let d = planes[[plane, r, c]] - mu;
                            acc += (-g2 * d * d).exp();
                        }
                    }
                    out[[o, pr, pc]] = acc * scale;
                }
            }
        }
        Ok((out, HistCache { input: x.as_standard_layout().into_owned(), mixed }))
    }

    pub fn forward(&self, x: ArrayView3<f64>) -> Result<Array3<f64>> {
        Ok(self.forward_cached(x)?.0)
    }

    pub fn backward(&self, cache: &HistCache, upstream: ArrayView3<f64>) -> Result<HistGrads> {
        let (channels, rows, cols) = cache.input.dim();
        let (out_r, out_c) = self.output_dims(rows, cols)?;
        if upstream.dim() != (self.output_channels(), out_r, out_c) {
            return Err(Error::shape(format!(
                "upstream {:?} vs histogram output {:?}",
                upstream.dim(),
                (self.output_channels(), out_r, out_c)
            )));
        }
        let planes = cache.mixed.as_ref().unwrap_or(&cache.input);
        let (s, t) = (self.pool.rows, self.pool.cols);
        let scale = 1.0 / (s * t) as f64;

        let mut g_planes = Array3::<f64>::zeros(planes.dim());
        let mut g_mu = Array2::<f64>::zeros(self.centers.dim());
        let mut g_gamma = Array2::<f64>::zeros(self.widths.dim());
        for o in 0..self.output_channels() {
            let (plane, b, k) = self.route(o);
            let (mu, gamma) = (self.centers[[b, k]], self.widths[[b, k]]);
            let g2 = gamma * gamma;
            let (mut acc_mu, mut acc_gamma) = (0.0, 0.0);
            for pr in 0..out_r {
                for pc in 0..out_c {
                    let g = upstream[[o, pr, pc]] * scale;
                    if g == 0.0 {
                        continue;
                    }
                    for r in pr * s..(pr + 1) * s {
                        for c in pc * t..(pc + 1) * t {
                            let d = planes[[plane, r, c]] - mu;
                            let e = (-g2 * d * d).exp() * g;
                            let du = -2.0 * g2 * d * e;
                            g_planes[[plane, r, c]] += du;
                            acc_mu -= du;
                            acc_gamma -= 2.0 * gamma * d * d * e;
                        }
                    }
                }
            }
            g_mu[[b, k]] += acc_mu;
            g_gamma[[b, k]] += acc_gamma;
        }

        let (g_input, g_mixing) = match &self.mixing {
            None => (g_planes, None),
            Some(a) => {
                let bins = a.nrows();
                let gu = g_planes.into_shape_with_order((bins, rows * cols)).expect("contiguous");
                let x = cache.input.view().into_shape_with_order((channels, rows * cols)).expect("contiguous");
                let g_a = gu.dot(&x.t());
                let g_x = a.t().dot(&gu).into_shape_with_order((channels, rows, cols)).expect("sizes agree");
                (g_x, Some(g_a))
            }
        };
        Ok(HistGrads { input: g_input, mixing: g_mixing, centers: g_mu, widths: g_gamma })
    }
}

/// Apply the histogram layer to feature maps.
pub fn histogram_forward(f: ArrayView3<f64>, h: &HistogramParams) -> Result<Array3<f64>> {
    h.forward(f)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array3;

    fn per_channel(bins: usize, channels: usize, pool: (usize, usize)) -> HistogramParams {
        init_histogram(bins, channels, Wiring::PerChannel, HistInit::default(), PoolWindow::new(pool.0, pool.1)).unwrap()
    }

    #[test]
    fn linspace_initialization() {
        let h = init_histogram(3, 1, Wiring::PerChannel, HistInit::UniformRange { lo: 0.0, hi: 1.0 }, PoolWindow::new(1, 1)).unwrap();
        assert_eq!(h.centers.column(0).to_vec(), vec![0.0, 0.5, 1.0]);
        assert_eq!(h.widths.column(0).to_vec(), vec![3.0; 3]);
        let one = init_histogram(1, 1, Wiring::PerChannel, HistInit::UniformRange { lo: 0.0, hi: 1.0 }, PoolWindow::new(1, 1)).unwrap();
        assert_eq!(one.centers[[0, 0]], 0.5);
        assert_eq!(one.widths[[0, 0]], 1.0);
    }

    #[test]
    fn init_errors_and_determinism() {
        let pool = PoolWindow::new(1, 1);
        assert!(init_histogram(0, 1, Wiring::Mixed, HistInit::default(), pool).is_err());
        assert!(init_histogram(2, 1, Wiring::Mixed, HistInit::UniformRange { lo: 1.0, hi: 1.0 }, pool).is_err());
        let r = HistInit::Random { lo: -1.0, hi: 2.0, seed: 5 };
        let a = init_histogram(4, 3, Wiring::Mixed, r, pool).unwrap();
        assert_eq!(a, init_histogram(4, 3, Wiring::Mixed, r, pool).unwrap());
        assert!(a.centers.iter().all(|&c| (-1.0..=2.0).contains(&c)));
        assert_eq!(a.mixing.as_ref().unwrap(), &Array2::from_elem((4, 3), 1.0 / 3.0));
    }

    #[test]
    fn input_at_centre_gives_one() {
        let mut h = per_channel(3, 1, (2, 2));
        h.centers[[1, 0]] = 0.75;
        let out = h.forward(Array3::from_elem((1, 4, 6), 0.75).view()).unwrap();
        assert!(out.index_axis(ndarray::Axis(0), 1).iter().all(|&v| v == 1.0));
    }

    #[test]
    fn zero_width_gives_one() {
        let mut h = per_channel(2, 1, (1, 1));
        h.widths[[0, 0]] = 0.0;
        let x = Array3::from_shape_fn((1, 3, 3), |(_, r, c)| (r * 3 + c) as f64 * 10.0 - 40.0);
        let out = h.forward(x.view()).unwrap();
        assert!(out.index_axis(ndarray::Axis(0), 0).iter().all(|&v| v == 1.0));
    }

    #[test]
    fn scalar_value() {
        let mut h = per_channel(1, 1, (1, 1));
        h.centers[[0, 0]] = 1.0;
        h.widths[[0, 0]] = 1.0;
        let out = h.forward(Array3::from_elem((1, 1, 1), 2.0).view()).unwrap();
        assert!((out[[0, 0, 0]] - 0.36787944117144233).abs() < 1e-15);
    }

    #[test]
    fn stationary_point_and_zero_width_gradients() {
        let mut h = per_channel(1, 1, (2, 2));
        h.centers[[0, 0]] = 0.3;
        let x = Array3::from_elem((1, 4, 4), 0.3);
        let (_, cache) = h.forward_cached(x.view()).unwrap();
        let g = h.backward(&cache, Array3::from_elem((1, 2, 2), 1.0).view()).unwrap();
        assert!(g.input.iter().all(|&v| v == 0.0));
        assert_eq!(g.centers[[0, 0]], 0.0);

        h.widths[[0, 0]] = 0.0;
        let x = Array3::from_shape_fn((1, 4, 4), |(_, r, c)| (r + 2 * c) as f64);
        let (_, cache) = h.forward_cached(x.view()).unwrap();
        let g = h.backward(&cache, Array3::from_elem((1, 2, 2), 1.0).view()).unwrap();
        assert_eq!(g.widths[[0, 0]], 0.0);
    }

    #[test]
    fn pooling_larger_than_plane_is_config_error() {
        let h = per_channel(2, 1, (5, 2));
        assert!(matches!(h.forward(Array3::zeros((1, 4, 4)).view()), Err(Error::Config(_))));
    }

    #[test]
    fn per_channel_output_is_channel_major() {
        let mut h = per_channel(2, 2, (1, 1));
        h.centers[[1, 1]] = 5.0;
        let x = Array3::from_shape_fn((2, 1, 1), |(k, _, _)| if k == 1 { 5.0 } else { 0.0 });
        let out = h.forward(x.view()).unwrap();
        assert_eq!(out.dim(), (4, 1, 1));
        assert_eq!(out[[3, 0, 0]], 1.0);
    }

    #[test]
    fn wrong_channel_count() {
        let h = init_histogram(2, 3, Wiring::Mixed, HistInit::default(), PoolWindow::new(1, 1)).unwrap();
        assert!(matches!(h.forward(Array3::zeros((2, 3, 3)).view()), Err(Error::Shape(_))));
    }
}
