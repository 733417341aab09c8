//! Layer execution: forward passes that record what the backward pass needs,
//! and the matching backward passes.

use std::hash::{Hash, Hasher};

use serde::{Deserialize, Serialize};

use super::conv::{conv2d_backward, conv2d_im2col, Conv2dSpec};
use super::param::Param;
use crate::error::{GazeError, Result};
use crate::tensor::{Scalar, Tensor};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PoolSpec {
    pub window: usize,
    pub stride: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum LayerSpec {
    Conv2d(Conv2dSpec),
    MaxPool2d(PoolSpec),
    Relu,
    FullyConnected { in_features: usize, out_features: usize },
    Flatten,
    /// Joins 1-D inputs end to end, in argument order.
    Concat,
}

impl LayerSpec {
    pub fn kind_name(&self) -> &'static str {
        match self {
            LayerSpec::Conv2d(_) => "conv2d",
            LayerSpec::MaxPool2d(_) => "maxpool2d",
            LayerSpec::Relu => "relu",
            LayerSpec::FullyConnected { .. } => "fully_connected",
            LayerSpec::Flatten => "flatten",
            LayerSpec::Concat => "concat",
        }
    }

    /// Weight and bias shapes for parameterised layers.
    pub fn param_shapes(&self) -> Option<(Vec<usize>, Vec<usize>)> {
        match self {
            LayerSpec::Conv2d(c) => Some((c.weight_shape().to_vec(), vec![c.out_channels])),
            LayerSpec::FullyConnected {
                in_features,
                out_features,
            } => Some((vec![*out_features, *in_features], vec![*out_features])),
            _ => None,
        }
    }

    pub fn fan_in(&self) -> usize {
        match self {
            LayerSpec::Conv2d(c) => c.fan_in(),
            LayerSpec::FullyConnected { in_features, .. } => *in_features,
            _ => 0,
        }
    }

    /// Statically computed output shape.
    pub fn output_shape(&self, inputs: &[&[usize]]) -> Result<Vec<usize>> {
        if !matches!(self, LayerSpec::Concat) && inputs.len() != 1 {
            return Err(GazeError::Shape(format!(
                "{} takes exactly one input, got {}",
                self.kind_name(),
                inputs.len()
            )));
        }
        match self {
            LayerSpec::Conv2d(c) => Ok(c.output_shape(inputs[0])?.to_vec()),
            LayerSpec::MaxPool2d(p) => {
                let [c, h, w] = match inputs[0] {
                    [c, h, w] => [*c, *h, *w],
                    s => {
                        return Err(GazeError::Shape(format!(
                            "maxpool expects a [C, H, W] input, got {s:?}"
                        )))
                    }
                };
                if p.window == 0 || p.stride == 0 || h < p.window || w < p.window {
                    return Err(GazeError::Shape(format!(
                        "maxpool window {} stride {} incompatible with {h}x{w}",
                        p.window, p.stride
                    )));
                }
                Ok(vec![c, (h - p.window) / p.stride + 1, (w - p.window) / p.stride + 1])
            }
            LayerSpec::Relu => Ok(inputs[0].to_vec()),
            LayerSpec::FullyConnected {
                in_features,
                out_features,
            } => {
                if inputs[0] != [*in_features] {
                    return Err(GazeError::Shape(format!(
                        "fully connected layer expects [{in_features}], got {:?}",
                        inputs[0]
                    )));
                }
                Ok(vec![*out_features])
            }
            LayerSpec::Flatten => Ok(vec![inputs[0].iter().product()]),
            LayerSpec::Concat => {
                if inputs.is_empty() {
                    return Err(GazeError::Shape("concat needs at least one input".into()));
                }
                let mut total = 0;
                for s in inputs {
                    match s {
                        [n] => total += n,
                        _ => {
                            return Err(GazeError::Shape(format!(
                                "concat expects 1-D inputs, got {s:?}"
                            )))
                        }
                    }
                }
                Ok(vec![total])
            }
        }
    }
}

/// What a forward call leaves behind for its backward call.
#[derive(Clone, Debug)]
pub enum ForwardCtx<T> {
    Conv { input_shape: Vec<usize>, cols: Vec<T> },
    Pool { input_shape: Vec<usize>, argmax: Vec<usize> },
    Relu { mask: Vec<bool> },
    Fc { input: Tensor<T> },
    Flatten { input_shape: Vec<usize> },
    Concat { sizes: Vec<usize> },
}

impl<T> ForwardCtx<T> {
    /// Hashes the piecewise-linear branch decisions (ReLU masks, pool winners).
    /// Two evaluations with equal signatures lie on the same linear piece.
    pub fn hash_kinks<H: Hasher>(&self, state: &mut H) {
        match self {
            ForwardCtx::Relu { mask } => mask.hash(state),
            ForwardCtx::Pool { argmax, .. } => argmax.hash(state),
            _ => {}
        }
    }
}

pub struct Backward<T> {
    pub input_grads: Vec<Tensor<T>>,
    pub param_grads: Option<(Tensor<T>, Tensor<T>)>,
}

fn require_params<'a, T: Scalar>(spec: &LayerSpec, params: Option<&'a Param<T>>) -> Result<&'a Param<T>> {
    let p = params.ok_or_else(|| {
        GazeError::InvalidArgument(format!("{} layer requires parameters", spec.kind_name()))
    })?;
    let (ws, bs) = spec.param_shapes().expect("parameterised layer");
    if p.weights.shape() != ws.as_slice() || p.bias.shape() != bs.as_slice() {
        return Err(GazeError::Shape(format!(
            "{} parameters {:?}/{:?} do not match expected {ws:?}/{bs:?}",
            spec.kind_name(),
            p.weights.shape(),
            p.bias.shape()
        )));
    }
    Ok(p)
}

pub fn forward<T: Scalar>(
    spec: &LayerSpec,
    params: Option<&Param<T>>,
    inputs: &[&Tensor<T>],
) -> Result<(Tensor<T>, ForwardCtx<T>)> {
    let shapes: Vec<&[usize]> = inputs.iter().map(|t| t.shape()).collect();
    let out_shape = spec.output_shape(&shapes)?;
    match spec {
        LayerSpec::Conv2d(c) => {
            let p = require_params(spec, params)?;
            let (out, cols) = conv2d_im2col(c, inputs[0], &p.weights, &p.bias)?;
            Ok((
                out,
                ForwardCtx::Conv {
                    input_shape: inputs[0].shape().to_vec(),
                    cols,
                },
            ))
        }
        LayerSpec::MaxPool2d(p) => {
            let x = inputs[0];
            let (h, w) = (x.shape()[1], x.shape()[2]);
            let (oc, oh, ow) = (out_shape[0], out_shape[1], out_shape[2]);
            let mut out = Vec::with_capacity(oc * oh * ow);
            let mut argmax = Vec::with_capacity(oc * oh * ow);
            let data = x.data();
            for c in 0..oc {
                for oy in 0..oh {
                    for ox in 0..ow {
                        let mut best_idx = (c * h + oy * p.stride) * w + ox * p.stride;
                        let mut best = data[best_idx];
                        for ky in 0..p.window {
                            for kx in 0..p.window {
                                let idx = (c * h + oy * p.stride + ky) * w + ox * p.stride + kx;
                                if data[idx] > best {
                                    best = data[idx];
                                    best_idx = idx;
                                }
                            }
                        }
                        out.push(best);
                        argmax.push(best_idx);
                    }
                }
            }
            Ok((
                Tensor::new(out_shape, out)?,
                ForwardCtx::Pool {
                    input_shape: x.shape().to_vec(),
                    argmax,
                },
            ))
        }
        LayerSpec::Relu => {
            let x = inputs[0];
            let mask: Vec<bool> = x.data().iter().map(|v| *v > T::zero()).collect();
            let out = x
                .data()
                .iter()
                .zip(&mask)
                .map(|(v, m)| if *m { *v } else { T::zero() })
                .collect();
            Ok((Tensor::new(out_shape, out)?, ForwardCtx::Relu { mask }))
        }
        LayerSpec::FullyConnected {
            in_features,
            out_features,
        } => {
            let p = require_params(spec, params)?;
            let x = inputs[0].data();
            let w = p.weights.data();
            let out = (0..*out_features)
                .map(|o| {
                    w[o * in_features..(o + 1) * in_features]
                        .iter()
                        .zip(x)
                        .fold(p.bias.data()[o], |acc, (a, b)| acc + *a * *b)
                })
                .collect();
            Ok((
                Tensor::new(out_shape, out)?,
                ForwardCtx::Fc {
                    input: inputs[0].clone(),
                },
            ))
        }
        LayerSpec::Flatten => Ok((
            inputs[0].clone().reshape(&out_shape)?,
            ForwardCtx::Flatten {
                input_shape: inputs[0].shape().to_vec(),
            },
        )),
        LayerSpec::Concat => {
            let mut out = Vec::with_capacity(out_shape[0]);
            let mut sizes = Vec::with_capacity(inputs.len());
            for t in inputs {
                out.extend_from_slice(t.data());
                sizes.push(t.len());
            }
            Ok((Tensor::new(out_shape, out)?, ForwardCtx::Concat { sizes }))
        }
    }
}

fn context_mismatch(spec: &LayerSpec) -> GazeError {
    GazeError::InvalidArgument(format!(
        "forward context does not belong to a {} layer",
        spec.kind_name()
    ))
}

fn check_upstream<T: Scalar>(expected: &[usize], upstream: &Tensor<T>, spec: &LayerSpec) -> Result<()> {
    if upstream.shape() != expected {
        return Err(GazeError::Shape(format!(
            "{} upstream gradient {:?} does not match output {expected:?}",
            spec.kind_name(),
            upstream.shape()
        )));
    }
    Ok(())
}

pub fn backward<T: Scalar>(
    spec: &LayerSpec,
    params: Option<&Param<T>>,
    ctx: &ForwardCtx<T>,
    upstream: &Tensor<T>,
) -> Result<Backward<T>> {
    match (spec, ctx) {
        (LayerSpec::Conv2d(c), ForwardCtx::Conv { input_shape, cols }) => {
            let p = require_params(spec, params)?;
            let g = conv2d_backward(c, input_shape, cols, &p.weights, upstream)?;
            Ok(Backward {
                input_grads: vec![g.input],
                param_grads: Some((g.weights, g.bias)),
            })
        }
        (LayerSpec::MaxPool2d(_), ForwardCtx::Pool { input_shape, argmax }) => {
            let out_shape = spec.output_shape(&[input_shape])?;
            check_upstream(&out_shape, upstream, spec)?;
            let mut dx = vec![T::zero(); input_shape.iter().product()];
            for (g, idx) in upstream.data().iter().zip(argmax) {
                dx[*idx] = dx[*idx] + *g;
            }
            Ok(Backward {
                input_grads: vec![Tensor::new(input_shape.clone(), dx)?],
                param_grads: None,
            })
        }
        (LayerSpec::Relu, ForwardCtx::Relu { mask }) => {
            if upstream.len() != mask.len() {
                return Err(GazeError::Shape(format!(
                    "relu upstream gradient has {} values, forward saw {}",
                    upstream.len(),
                    mask.len()
                )));
            }
            let dx = upstream
                .data()
                .iter()
                .zip(mask)
                .map(|(g, m)| if *m { *g } else { T::zero() })
                .collect();
            Ok(Backward {
                input_grads: vec![Tensor::new(upstream.shape().to_vec(), dx)?],
                param_grads: None,
            })
        }
        (
            LayerSpec::FullyConnected {
                in_features,
                out_features,
            },
            ForwardCtx::Fc { input },
        ) => {
            let p = require_params(spec, params)?;
            check_upstream(&[*out_features], upstream, spec)?;
            if input.shape() != [*in_features] {
                return Err(context_mismatch(spec));
            }
            let g = upstream.data();
            let x = input.data();
            let w = p.weights.data();
            let mut dw = Vec::with_capacity(out_features * in_features);
            for go in g {
                dw.extend(x.iter().map(|xi| *go * *xi));
            }
            let mut dx = vec![T::zero(); *in_features];
            for (o, go) in g.iter().enumerate() {
                if *go == T::zero() {
                    continue;
                }
                for (d, wv) in dx.iter_mut().zip(&w[o * in_features..(o + 1) * in_features]) {
                    *d = *d + *go * *wv;
                }
            }
            Ok(Backward {
                input_grads: vec![Tensor::new(vec![*in_features], dx)?],
                param_grads: Some((
                    Tensor::new(vec![*out_features, *in_features], dw)?,
                    Tensor::new(vec![*out_features], g.to_vec())?,
                )),
            })
        }
        (LayerSpec::Flatten, ForwardCtx::Flatten { input_shape }) => {
            check_upstream(&[input_shape.iter().product()], upstream, spec)?;
            Ok(Backward {
                input_grads: vec![upstream.clone().reshape(input_shape)?],
                param_grads: None,
            })
        }
        (LayerSpec::Concat, ForwardCtx::Concat { sizes }) => {
            check_upstream(&[sizes.iter().sum()], upstream, spec)?;
            let mut offset = 0;
            let mut grads = Vec::with_capacity(sizes.len());
            for n in sizes {
                grads.push(Tensor::new(vec![*n], upstream.data()[offset..offset + n].to_vec())?);
                offset += n;
            }
            Ok(Backward {
                input_grads: grads,
                param_grads: None,
            })
        }
        _ => Err(context_mismatch(spec)),
    }
}
