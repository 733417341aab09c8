use std::collections::BTreeMap;

use super::param::ParamSet;
use crate::error::{GazeError, Result};
use crate::tensor::{Scalar, Tensor};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

impl AdamConfig {
    pub fn with_lr(lr: f64) -> Self {
        Self {
            lr,
            ..Self::default()
        }
    }
}

#[derive(Clone, Debug)]
struct Moments<T> {
    m_w: Tensor<T>,
    v_w: Tensor<T>,
    m_b: Tensor<T>,
    v_b: Tensor<T>,
}

#[derive(Clone, Debug)]
pub struct AdamState<T = f32> {
    pub config: AdamConfig,
    step: u64,
    moments: BTreeMap<String, Moments<T>>,
}

impl<T: Scalar> AdamState<T> {
    pub fn new(params: &ParamSet<T>, config: AdamConfig) -> Self {
        let moments = params
            .iter()
            .map(|(name, p)| {
                (
                    name.clone(),
                    Moments {
                        m_w: Tensor::zeros(p.weights.shape()),
                        v_w: Tensor::zeros(p.weights.shape()),
                        m_b: Tensor::zeros(p.bias.shape()),
                        v_b: Tensor::zeros(p.bias.shape()),
                    },
                )
            })
            .collect();
        Self {
            config,
            step: 0,
            moments,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }
}

fn update<T: Scalar>(
    value: &mut Tensor<T>,
    grad: &Tensor<T>,
    m: &mut Tensor<T>,
    v: &mut Tensor<T>,
    cfg: &AdamConfig,
    bc1: f64,
    bc2: f64,
) {
    let (b1, b2) = (T::lit(cfg.beta1), T::lit(cfg.beta2));
    let (one_b1, one_b2) = (T::lit(1.0 - cfg.beta1), T::lit(1.0 - cfg.beta2));
    let (lr, eps) = (T::lit(cfg.lr), T::lit(cfg.eps));
    let (bc1, bc2) = (T::lit(bc1), T::lit(bc2));
    let iter = value
        .data_mut()
        .iter_mut()
        .zip(grad.data())
        .zip(m.data_mut().iter_mut().zip(v.data_mut().iter_mut()));
    for ((p, g), (mi, vi)) in iter {
        *mi = b1 * *mi + one_b1 * *g;
        *vi = b2 * *vi + one_b2 * *g * *g;
        let m_hat = *mi / bc1;
        let v_hat = *vi / bc2;
        *p = *p - lr * m_hat / (v_hat.sqrt() + eps);
    }
}

/// One bias-corrected Adam update over every parameter, using the gradients
/// currently stored in `params`.
pub fn adam_step<T: Scalar>(params: &mut ParamSet<T>, state: &mut AdamState<T>) -> Result<()> {
    if params.len() != state.moments.len() {
        return Err(GazeError::Shape(format!(
            "optimizer tracks {} parameters, model has {}",
            state.moments.len(),
            params.len()
        )));
    }
    for (name, p) in params.iter() {
        let m = state
            .moments
            .get(name)
            .ok_or_else(|| GazeError::Shape(format!("optimizer has no state for {name}")))?;
        if m.m_w.shape() != p.weights.shape()
            || m.m_b.shape() != p.bias.shape()
            || p.grad_weights.shape() != p.weights.shape()
            || p.grad_bias.shape() != p.bias.shape()
        {
            return Err(GazeError::Shape(format!("optimizer state for {name} has the wrong shape")));
        }
    }

    state.step += 1;
    let t = state.step as i32;
    let cfg = state.config;
    let bc1 = 1.0 - cfg.beta1.powi(t);
    let bc2 = 1.0 - cfg.beta2.powi(t);
    for (name, p) in params.iter_mut() {
        let m = state.moments.get_mut(name).expect("checked above");
        update(&mut p.weights, &p.grad_weights, &mut m.m_w, &mut m.v_w, &cfg, bc1, bc2);
        update(&mut p.bias, &p.grad_bias, &mut m.m_b, &mut m.v_b, &cfg, bc1, bc2);
    }
    Ok(())
}
