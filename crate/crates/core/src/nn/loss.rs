//! Regression losses over batches of 2-D points. Gradients are with respect to
//! the predictions.

use serde::{Deserialize, Serialize};

use crate::error::{GazeError, Result};
use crate::tensor::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LossConfig {
    EuclideanMse,
    SmoothL1 { beta: f64 },
}

impl LossConfig {
    pub fn evaluate<T: Scalar>(&self, pred: &[[T; 2]], target: &[[T; 2]]) -> Result<(T, Vec<[T; 2]>)> {
        match self {
            LossConfig::EuclideanMse => loss_euclidean(pred, target),
            LossConfig::SmoothL1 { beta } => loss_smooth_l1(pred, target, T::lit(*beta)),
        }
    }
}

fn check_batch<T>(pred: &[[T; 2]], target: &[[T; 2]]) -> Result<()> {
    if pred.is_empty() {
        return Err(GazeError::InvalidArgument("loss over an empty batch".into()));
    }
    if pred.len() != target.len() {
        return Err(GazeError::Shape(format!(
            "{} predictions vs {} targets",
            pred.len(),
            target.len()
        )));
    }
    Ok(())
}

/// Mean over the batch of the squared L2 distance.
pub fn loss_euclidean<T: Scalar>(pred: &[[T; 2]], target: &[[T; 2]]) -> Result<(T, Vec<[T; 2]>)> {
    check_batch(pred, target)?;
    let n = T::from_usize(pred.len()).expect("batch size");
    let two = T::lit(2.0);
    let mut total = T::zero();
    let mut grad = Vec::with_capacity(pred.len());
    for (p, t) in pred.iter().zip(target) {
        let (dx, dy) = (p[0] - t[0], p[1] - t[1]);
        total = total + dx * dx + dy * dy;
        grad.push([two * dx / n, two * dy / n]);
    }
    Ok((total / n, grad))
}

/// Elementwise Smooth-L1 value for one residual.
pub fn smooth_l1<T: Scalar>(r: T, beta: T) -> T {
    let a = r.abs();
    if a < beta {
        r * r / (T::lit(2.0) * beta)
    } else {
        a - beta / T::lit(2.0)
    }
}

/// Smooth-L1 applied per coordinate, mean-reduced over all `2·N` elements.
pub fn loss_smooth_l1<T: Scalar>(pred: &[[T; 2]], target: &[[T; 2]], beta: T) -> Result<(T, Vec<[T; 2]>)> {
    if !(beta > T::zero()) {
        return Err(GazeError::InvalidArgument(format!(
            "smooth L1 beta must be positive, got {beta:?}"
        )));
    }
    check_batch(pred, target)?;
    let count = T::from_usize(pred.len() * 2).expect("element count");
    let mut total = T::zero();
    let mut grad = Vec::with_capacity(pred.len());
    for (p, t) in pred.iter().zip(target) {
        let mut g = [T::zero(); 2];
        for k in 0..2 {
            let d = p[k] - t[k];
            total = total + smooth_l1(d, beta);
            let dl = if d.abs() < beta { d / beta } else { d.signum() };
            g[k] = dl / count;
        }
        grad.push(g);
    }
    Ok((total / count, grad))
}
