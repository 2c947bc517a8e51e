//! Stride-1 2-D cross-correlation with exact backward pass.

use ndarray::{Array1, Array3, Array4, ArrayView3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Padding {
    /// Zero padding of `(M-1)/2` x `(N-1)/2`; output keeps the input size.
    SameZero,
    Valid,
}

/// `K` filters of size `M x N` over `C` input channels.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterBank {
    /// `[K, C, M, N]`
    pub weights: Array4<f64>,
    pub bias: Option<Array1<f64>>,
    pub padding: Padding,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvGrads {
    pub input: Array3<f64>,
    pub weights: Array4<f64>,
    pub bias: Option<Array1<f64>>,
}

impl FilterBank {
    pub fn new(weights: Array4<f64>, bias: Option<Array1<f64>>, padding: Padding) -> Result<Self> {
        let (k, _, m, n) = weights.dim();
        if m % 2 == 0 || n % 2 == 0 {
            return Err(Error::config(format!("kernel size {m}x{n} must be odd")));
        }
        if let Some(b) = &bias {
            if b.len() != k {
                return Err(Error::shape(format!("bias has {} entries for {k} filters", b.len())));
            }
        }
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::config("filter weights must be finite"));
        }
        Ok(FilterBank { weights, bias, padding })
    }

    pub fn filters(&self) -> usize {
        self.weights.dim().0
    }

    pub fn in_channels(&self) -> usize {
        self.weights.dim().1
    }

    pub fn kernel(&self) -> (usize, usize) {
        let (_, _, m, n) = self.weights.dim();
        (m, n)
    }

    pub fn num_parameters(&self) -> usize {
        self.weights.len() + self.bias.as_ref().map_or(0, |b| b.len())
    }

    fn pads(&self) -> (usize, usize) {
        let (m, n) = self.kernel();
        match self.padding {
            Padding::SameZero => ((m - 1) / 2, (n - 1) / 2),
            Padding::Valid => (0, 0),
        }
    }

    /// Output spatial size for an input of `rows x cols`.
    pub fn output_dims(&self, rows: usize, cols: usize) -> Result<(usize, usize)> {
        let (m, n) = self.kernel();
        let (pr, pc) = self.pads();
        if rows + 2 * pr < m || cols + 2 * pc < n {
            return Err(Error::shape(format!("input {rows}x{cols} smaller than kernel {m}x{n}")));
        }
        Ok((rows + 2 * pr - m + 1, cols + 2 * pc - n + 1))
    }

    fn check_input(&self, x: &ArrayView3<f64>) -> Result<(usize, usize, usize)> {
        let (c, r, w) = x.dim();
        if c != self.in_channels() {
            return Err(Error::shape(format!("input has {c} channels, filter bank expects {}", self.in_channels())));
        }
        Ok((c, r, w))
    }
}

/// Index range of output positions `o` for which `o + offset - pad` lands inside `0..len`.
fn valid_range(out_len: usize, len: usize, offset: usize, pad: usize) -> (usize, usize) {
    let lo = pad.saturating_sub(offset);
    let hi = (len + pad).saturating_sub(offset).min(out_len);
    (lo, hi.max(lo))
}

/// `out[k, r, c] = sum_{ch, m, n} w[k, ch, m, n] * x[ch, r + m - pr, c + n - pc] + b[k]`
pub fn conv2d_forward(x: ArrayView3<f64>, fb: &FilterBank) -> Result<Array3<f64>> {
    let (channels, rows, cols) = fb.check_input(&x)?;
    let (out_r, out_c) = fb.output_dims(rows, cols)?;
    let (m_len, n_len) = fb.kernel();
    let (pr, pc) = fb.pads();
    let x = x.as_standard_layout();
    let xs = x.as_slice().expect("standard layout");
    let mut out = Array3::zeros((fb.filters(), out_r, out_c));
    let os = out.as_slice_mut().expect("fresh array");

    for k in 0..fb.filters() {
        let plane = &mut os[k * out_r * out_c..(k + 1) * out_r * out_c];
        if let Some(b) = &fb.bias {
            plane.fill(b[k]);
        }
        for ch in 0..channels {
            let xp = &xs[ch * rows * cols..(ch + 1) * rows * cols];
            for m in 0..m_len {
                let (r_lo, r_hi) = valid_range(out_r, rows, m, pr);
                for n in 0..n_len {
                    let w = fb.weights[[k, ch, m, n]];
                    if w == 0.0 {
                        continue;
                    }
                    let (c_lo, c_hi) = valid_range(out_c, cols, n, pc);
                    for r in r_lo..r_hi {
                        let xr = r + m - pr;
                        let dst = &mut plane[r * out_c + c_lo..r * out_c + c_hi];
                        let src = &xp[xr * cols + c_lo + n - pc..xr * cols + c_hi + n - pc];
                        for (d, s) in dst.iter_mut().zip(src) {
                            *d += w * s;
                        }
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Gradients of a scalar loss with respect to input, weights and bias given `dL/d out`.
pub fn conv2d_backward(x: ArrayView3<f64>, fb: &FilterBank, upstream: ArrayView3<f64>) -> Result<ConvGrads> {
    let (channels, rows, cols) = fb.check_input(&x)?;
    let (out_r, out_c) = fb.output_dims(rows, cols)?;
    if upstream.dim() != (fb.filters(), out_r, out_c) {
        return Err(Error::shape(format!(
            "upstream gradient {:?} does not match output {:?}",
            upstream.dim(),
            (fb.filters(), out_r, out_c)
        )));
    }
    let (m_len, n_len) = fb.kernel();
    let (pr, pc) = fb.pads();
    let x = x.as_standard_layout();
    let xs = x.as_slice().expect("standard layout");
    let g = upstream.as_standard_layout();
    let gs = g.as_slice().expect("standard layout");

    let mut grad_x = Array3::<f64>::zeros((channels, rows, cols));
    let mut grad_w = Array4::<f64>::zeros(fb.weights.dim());
    let gx = grad_x.as_slice_mut().expect("fresh array");

    for k in 0..fb.filters() {
        let gp = &gs[k * out_r * out_c..(k + 1) * out_r * out_c];
        for ch in 0..channels {
            let xp = &xs[ch * rows * cols..(ch + 1) * rows * cols];
            let gxp = &mut gx[ch * rows * cols..(ch + 1) * rows * cols];
            for m in 0..m_len {
                let (r_lo, r_hi) = valid_range(out_r, rows, m, pr);
                for n in 0..n_len {
                    let w = fb.weights[[k, ch, m, n]];
                    let (c_lo, c_hi) = valid_range(out_c, cols, n, pc);
                    let mut acc = 0.0;
                    for r in r_lo..r_hi {
                        let xr = r + m - pr;
                        let grow = &gp[r * out_c + c_lo..r * out_c + c_hi];
                        let off = xr * cols + c_lo + n - pc;
                        let xrow = &xp[off..off + grow.len()];
                        let gxrow = &mut gxp[off..off + grow.len()];
                        for ((gv, xv), gxv) in grow.iter().zip(xrow).zip(gxrow.iter_mut()) {
                            acc += gv * xv;
                            *gxv += w * gv;
                        }
                    }
                    grad_w[[k, ch, m, n]] = acc;
                }
            }
        }
    }

    let grad_b = fb.bias.as_ref().map(|_| {
        Array1::from_iter((0..fb.filters()).map(|k| gs[k * out_r * out_c..(k + 1) * out_r * out_c].iter().sum()))
    });
    Ok(ConvGrads { input: grad_x, weights: grad_w, bias: grad_b })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rand_arr<D: ndarray::Dimension>(shape: impl ndarray::ShapeBuilder<Dim = D>, rng: &mut ChaCha8Rng) -> Array<f64, D> {
        Array::from_shape_simple_fn(shape, || rng.random_range(-1.0..1.0))
    }

    #[test]
    fn identity_kernel_passes_input_through() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = rand_arr((1, 5, 7), &mut rng);
        let mut w = Array4::zeros((1, 1, 3, 3));
        w[[0, 0, 1, 1]] = 1.0;
        let fb = FilterBank::new(w, None, Padding::SameZero).unwrap();
        assert_eq!(conv2d_forward(x.view(), &fb).unwrap(), x);
    }

    #[test]
    fn zero_sum_kernel_kills_constant_input() {
        let x = Array3::from_elem((1, 6, 6), 3.25);
        let w = Array4::from_shape_vec((1, 1, 3, 3), vec![-1., 0., 1., -2., 0., 2., -1., 0., 1.]).unwrap();
        let fb = FilterBank::new(w, None, Padding::Valid).unwrap();
        assert!(conv2d_forward(x.view(), &fb).unwrap().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn channel_mismatch_and_bad_upstream() {
        let fb = FilterBank::new(Array4::zeros((2, 3, 3, 3)), None, Padding::SameZero).unwrap();
        let x = Array3::zeros((2, 4, 4));
        assert!(matches!(conv2d_forward(x.view(), &fb), Err(Error::Shape(_))));
        let x = Array3::zeros((3, 4, 4));
        let g = Array3::zeros((2, 3, 4));
        assert!(matches!(conv2d_backward(x.view(), &fb, g.view()), Err(Error::Shape(_))));
    }

    #[test]
    fn even_kernels_rejected() {
        assert!(FilterBank::new(Array4::zeros((1, 1, 2, 3)), None, Padding::Valid).is_err());
    }

    #[test]
    fn zero_upstream_gives_zero_grads_and_backward_is_linear() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let x = rand_arr((2, 6, 5), &mut rng);
        let fb = FilterBank::new(rand_arr((3, 2, 3, 3), &mut rng), Some(rand_arr(3, &mut rng)), Padding::SameZero).unwrap();
        let zero = conv2d_backward(x.view(), &fb, Array3::zeros((3, 6, 5)).view()).unwrap();
        assert!(zero.input.iter().chain(zero.weights.iter()).chain(zero.bias.as_ref().unwrap().iter()).all(|&v| v == 0.0));

        let g = rand_arr((3, 6, 5), &mut rng);
        let once = conv2d_backward(x.view(), &fb, g.view()).unwrap();
        let twice = conv2d_backward(x.view(), &fb, (&g * 2.0).view()).unwrap();
        for (a, b) in once.input.iter().zip(twice.input.iter()) {
            assert!((2.0 * a - b).abs() < 1e-12);
        }
        for (a, b) in once.weights.iter().zip(twice.weights.iter()) {
            assert!((2.0 * a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn valid_padding_output_size() {
        let fb = FilterBank::new(Array4::zeros((1, 1, 3, 5)), None, Padding::Valid).unwrap();
        assert_eq!(fb.output_dims(10, 12).unwrap(), (8, 8));
        assert!(fb.output_dims(2, 12).is_err());
    }
}
