//! 2-D convolution kernels.
//!
//! Tensors are `[channels, height, width]`; weights are
//! `[out_channels, in_channels, kernel_h, kernel_w]`. Padding is zero padding
//! applied symmetrically.

use serde::{Deserialize, Serialize};

use super::linalg::{matmul, matmul_a_bt, matmul_at_b};
use crate::error::{GazeError, Result};
use crate::tensor::{Scalar, Tensor};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Conv2dSpec {
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel_h: usize,
    pub kernel_w: usize,
    pub stride: usize,
    pub padding: usize,
}

impl Conv2dSpec {
    pub fn square(in_channels: usize, out_channels: usize, kernel: usize, stride: usize, padding: usize) -> Self {
        Self {
            in_channels,
            out_channels,
            kernel_h: kernel,
            kernel_w: kernel,
            stride,
            padding,
        }
    }

    pub fn weight_shape(&self) -> [usize; 4] {
        [self.out_channels, self.in_channels, self.kernel_h, self.kernel_w]
    }

    pub fn fan_in(&self) -> usize {
        self.in_channels * self.kernel_h * self.kernel_w
    }

    /// Output `[out_channels, oh, ow]` for an input of the given shape.
    pub fn output_shape(&self, input: &[usize]) -> Result<[usize; 3]> {
        if self.stride == 0 {
            return Err(GazeError::Shape("conv stride must be positive".into()));
        }
        let [c, h, w] = match input {
            [c, h, w] => [*c, *h, *w],
            _ => {
                return Err(GazeError::Shape(format!(
                    "conv expects a [C, H, W] input, got {input:?}"
                )))
            }
        };
        if c != self.in_channels {
            return Err(GazeError::Shape(format!(
                "conv expects {} input channels, got {c}",
                self.in_channels
            )));
        }
        let (ph, pw) = (h + 2 * self.padding, w + 2 * self.padding);
        if ph < self.kernel_h || pw < self.kernel_w {
            return Err(GazeError::Shape(format!(
                "conv kernel {}x{} larger than padded input {ph}x{pw}",
                self.kernel_h, self.kernel_w
            )));
        }
        Ok([
            self.out_channels,
            (ph - self.kernel_h) / self.stride + 1,
            (pw - self.kernel_w) / self.stride + 1,
        ])
    }

    fn check_params<T: Scalar>(&self, weights: &Tensor<T>, bias: &Tensor<T>) -> Result<()> {
        if weights.shape() != self.weight_shape() || bias.shape() != [self.out_channels] {
            return Err(GazeError::Shape(format!(
                "conv parameters {:?}/{:?} do not match spec {:?}",
                weights.shape(),
                bias.shape(),
                self
            )));
        }
        Ok(())
    }
}

/// Direct loop convolution. Slow, used as the reference path.
pub fn conv2d_direct<T: Scalar>(
    spec: &Conv2dSpec,
    input: &Tensor<T>,
    weights: &Tensor<T>,
    bias: &Tensor<T>,
) -> Result<Tensor<T>> {
    let [oc, oh, ow] = spec.output_shape(input.shape())?;
    spec.check_params(weights, bias)?;
    let (h, w) = (input.shape()[1] as isize, input.shape()[2] as isize);
    let pad = spec.padding as isize;
    let x = input.data();
    let wt = weights.data();
    let mut out = vec![T::zero(); oc * oh * ow];
    for o in 0..oc {
        for oy in 0..oh {
            for ox in 0..ow {
                let mut acc = bias.data()[o];
                for c in 0..spec.in_channels {
                    for ky in 0..spec.kernel_h {
                        let iy = (oy * spec.stride + ky) as isize - pad;
                        if iy < 0 || iy >= h {
                            continue;
                        }
                        for kx in 0..spec.kernel_w {
                            let ix = (ox * spec.stride + kx) as isize - pad;
                            if ix < 0 || ix >= w {
                                continue;
                            }
                            let xi = (c as isize * h + iy) * w + ix;
                            let wi = ((o * spec.in_channels + c) * spec.kernel_h + ky) * spec.kernel_w + kx;
                            acc = acc + x[xi as usize] * wt[wi];
                        }
                    }
                }
                out[(o * oh + oy) * ow + ox] = acc;
            }
        }
    }
    Tensor::new(vec![oc, oh, ow], out)
}

/// Unfolds the input into a `[C·kh·kw, oh·ow]` column matrix.
pub fn im2col<T: Scalar>(spec: &Conv2dSpec, input: &Tensor<T>) -> Result<Vec<T>> {
    let [_, oh, ow] = spec.output_shape(input.shape())?;
    let (h, w) = (input.shape()[1] as isize, input.shape()[2] as isize);
    let pad = spec.padding as isize;
    let x = input.data();
    let cols_n = oh * ow;
    let mut cols = vec![T::zero(); spec.fan_in() * cols_n];
    for c in 0..spec.in_channels {
        for ky in 0..spec.kernel_h {
            for kx in 0..spec.kernel_w {
                let row = (c * spec.kernel_h + ky) * spec.kernel_w + kx;
                let dst = &mut cols[row * cols_n..(row + 1) * cols_n];
                for oy in 0..oh {
                    let iy = (oy * spec.stride + ky) as isize - pad;
                    if iy < 0 || iy >= h {
                        continue;
                    }
                    let src_row = (c as isize * h + iy) * w;
                    for ox in 0..ow {
                        let ix = (ox * spec.stride + kx) as isize - pad;
                        if ix >= 0 && ix < w {
                            dst[oy * ow + ox] = x[(src_row + ix) as usize];
                        }
                    }
                }
            }
        }
    }
    Ok(cols)
}

/// Scatter-adds a column matrix back into an input-shaped buffer.
fn col2im<T: Scalar>(spec: &Conv2dSpec, cols: &[T], input_shape: &[usize], oh: usize, ow: usize) -> Vec<T> {
    let (h, w) = (input_shape[1] as isize, input_shape[2] as isize);
    let pad = spec.padding as isize;
    let cols_n = oh * ow;
    let mut out = vec![T::zero(); input_shape.iter().product()];
    for c in 0..spec.in_channels {
        for ky in 0..spec.kernel_h {
            for kx in 0..spec.kernel_w {
                let row = (c * spec.kernel_h + ky) * spec.kernel_w + kx;
                let src = &cols[row * cols_n..(row + 1) * cols_n];
                for oy in 0..oh {
                    let iy = (oy * spec.stride + ky) as isize - pad;
                    if iy < 0 || iy >= h {
                        continue;
                    }
                    let dst_row = (c as isize * h + iy) * w;
                    for ox in 0..ow {
                        let ix = (ox * spec.stride + kx) as isize - pad;
                        if ix >= 0 && ix < w {
                            let d = (dst_row + ix) as usize;
                            out[d] = out[d] + src[oy * ow + ox];
                        }
                    }
                }
            }
        }
    }
    out
}

/// im2col + matrix-multiply convolution. Returns the output and the column
/// matrix, which the backward pass reuses.
pub fn conv2d_im2col<T: Scalar>(
    spec: &Conv2dSpec,
    input: &Tensor<T>,
    weights: &Tensor<T>,
    bias: &Tensor<T>,
) -> Result<(Tensor<T>, Vec<T>)> {
    let [oc, oh, ow] = spec.output_shape(input.shape())?;
    spec.check_params(weights, bias)?;
    let cols = im2col(spec, input)?;
    let n = oh * ow;
    let mut out = vec![T::zero(); oc * n];
    matmul(weights.data(), &cols, &mut out, oc, spec.fan_in(), n);
    for (o, b) in bias.data().iter().enumerate() {
        out[o * n..(o + 1) * n].iter_mut().for_each(|v| *v = *v + *b);
    }
    Ok((Tensor::new(vec![oc, oh, ow], out)?, cols))
}

pub struct ConvGrads<T> {
    pub input: Tensor<T>,
    pub weights: Tensor<T>,
    pub bias: Tensor<T>,
}

pub fn conv2d_backward<T: Scalar>(
    spec: &Conv2dSpec,
    input_shape: &[usize],
    cols: &[T],
    weights: &Tensor<T>,
    upstream: &Tensor<T>,
) -> Result<ConvGrads<T>> {
    let [oc, oh, ow] = spec.output_shape(input_shape)?;
    if upstream.shape() != [oc, oh, ow] {
        return Err(GazeError::Shape(format!(
            "conv upstream gradient {:?} does not match output [{oc}, {oh}, {ow}]",
            upstream.shape()
        )));
    }
    let n = oh * ow;
    let k = spec.fan_in();
    if cols.len() != k * n {
        return Err(GazeError::Shape("conv forward context does not match spec".into()));
    }
    let dy = upstream.data();

    let mut dw = vec![T::zero(); oc * k];
    matmul_a_bt(dy, cols, &mut dw, oc, n, k);

    let db: Vec<T> = (0..oc).map(|o| dy[o * n..(o + 1) * n].iter().copied().sum()).collect();

    let mut dcols = vec![T::zero(); k * n];
    matmul_at_b(weights.data(), dy, &mut dcols, k, oc, n);
    let dx = col2im(spec, &dcols, input_shape, oh, ow);

    Ok(ConvGrads {
        input: Tensor::new(input_shape.to_vec(), dx)?,
        weights: Tensor::new(spec.weight_shape().to_vec(), dw)?,
        bias: Tensor::new(vec![oc], db)?,
    })
}
