//! Central finite-difference verification of analytic gradients.
//!
//! Network evaluations report a kink signature (ReLU masks and pool winners).
//! A perturbation that changes the signature straddles a non-differentiable
//! point, so that coordinate is skipped and another one is drawn.

use std::collections::hash_map::DefaultHasher;
use std::hash::Hasher;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::layers::{backward, forward, ForwardCtx, LayerSpec};
use super::param::{Param, ParamSet};
use crate::error::{GazeError, Result};
use crate::tensor::{Scalar, Tensor};

/// Result of one scalar-loss evaluation.
#[derive(Clone, Copy, Debug)]
pub struct Probe {
    pub loss: f64,
    pub kinks: u64,
}

#[derive(Clone, Debug, Default)]
pub struct GradCheckReport {
    pub max_relative_error: f64,
    /// Maximum per parameter tensor, e.g. `("eye.conv1.weights", 3e-9)`.
    pub per_tensor: Vec<(String, f64)>,
    pub checked: usize,
    pub skipped_kinks: usize,
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-8)
}

pub fn kink_signature<'a, T: 'a>(ctxs: impl IntoIterator<Item = &'a ForwardCtx<T>>) -> u64 {
    let mut h = DefaultHasher::new();
    for c in ctxs {
        c.hash_kinks(&mut h);
    }
    h.finish()
}

fn check_eps(eps: f64) -> Result<()> {
    if !(1e-4..=1e-2).contains(&eps) {
        return Err(GazeError::InvalidArgument(format!(
            "finite-difference step {eps} outside [1e-4, 1e-2]"
        )));
    }
    Ok(())
}

fn finite(p: Probe) -> Result<Probe> {
    if !p.loss.is_finite() {
        return Err(GazeError::NonFinite("loss during gradient check".into()));
    }
    Ok(p)
}

#[derive(Clone, Copy)]
enum Slot {
    Weights,
    Bias,
}

fn slot_mut<T>(p: &mut Param<T>, slot: Slot) -> &mut Tensor<T> {
    match slot {
        Slot::Weights => &mut p.weights,
        Slot::Bias => &mut p.bias,
    }
}

/// Compares the gradients written by `eval` against central differences.
///
/// `eval(params, with_grads)` must compute the scalar loss and, when
/// `with_grads` is set, accumulate analytic gradients into `params`.
/// Up to `samples_per_tensor` coordinates are checked per weight/bias tensor.
pub fn grad_check<T, F>(
    params: &mut ParamSet<T>,
    mut eval: F,
    eps: f64,
    samples_per_tensor: usize,
    seed: u64,
) -> Result<GradCheckReport>
where
    T: Scalar,
    F: FnMut(&mut ParamSet<T>, bool) -> Result<Probe>,
{
    check_eps(eps)?;
    params.zero_grads();
    let base = finite(eval(params, true)?)?;
    let analytic: ParamSet<T> = params.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = GradCheckReport::default();
    let names: Vec<String> = params.names().cloned().collect();
    let h = T::lit(eps);

    for name in &names {
        for (slot, suffix) in [(Slot::Weights, "weights"), (Slot::Bias, "bias")] {
            let grads = match slot {
                Slot::Weights => &analytic.get(name).expect("present").grad_weights,
                Slot::Bias => &analytic.get(name).expect("present").grad_bias,
            };
            let n = grads.len();
            let order: Vec<usize> = sample(&mut rng, n, n).into_vec();
            let mut tensor_max = 0.0f64;
            let mut done = 0;
            for idx in order {
                if done >= samples_per_tensor {
                    break;
                }
                let original = slot_mut(params.get_mut(name).expect("present"), slot).data()[idx];
                slot_mut(params.get_mut(name).expect("present"), slot).data_mut()[idx] = original + h;
                let plus = eval(params, false).and_then(finite);
                slot_mut(params.get_mut(name).expect("present"), slot).data_mut()[idx] = original - h;
                let minus = eval(params, false).and_then(finite);
                slot_mut(params.get_mut(name).expect("present"), slot).data_mut()[idx] = original;
                let (plus, minus) = (plus?, minus?);
                if plus.kinks != base.kinks || minus.kinks != base.kinks {
                    report.skipped_kinks += 1;
                    continue;
                }
                let numeric = (plus.loss - minus.loss) / (2.0 * eps);
                let a = grads.data()[idx].to_f64_lossy();
                if !a.is_finite() {
                    return Err(GazeError::NonFinite(format!("analytic gradient of {name}")));
                }
                tensor_max = tensor_max.max(relative_error(a, numeric));
                done += 1;
            }
            report.checked += done;
            report.max_relative_error = report.max_relative_error.max(tensor_max);
            report.per_tensor.push((format!("{name}.{suffix}"), tensor_max));
        }
    }
    params.zero_grads();
    Ok(report)
}

/// Gradient check of a single layer: parameters and every input, under the
/// loss `Σ cᵢ·yᵢ` with fixed random coefficients.
pub fn check_layer(
    spec: &LayerSpec,
    input_shapes: &[Vec<usize>],
    eps: f64,
    seed: u64,
) -> Result<LayerCheck> {
    check_eps(eps)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let inputs: Vec<Tensor<f64>> = input_shapes
        .iter()
        .map(|s| Tensor::from_fn(s, |_| rng.gen_range(-1.0..1.0)))
        .collect();
    let mut param = match spec.param_shapes() {
        Some((ws, bs)) => {
            let mut p = Param::new(
                Tensor::from_fn(&ws, |_| rng.gen_range(-1.0..1.0)),
                Tensor::from_fn(&bs, |_| rng.gen_range(-0.5..0.5)),
            );
            p.zero_grads();
            Some(p)
        }
        None => None,
    };
    let shape_refs: Vec<&[usize]> = input_shapes.iter().map(|s| s.as_slice()).collect();
    let out_shape = spec.output_shape(&shape_refs)?;
    let coeffs = Tensor::<f64>::from_fn(&out_shape, |_| rng.gen_range(-1.0..1.0));

    let eval = |inputs: &[Tensor<f64>], param: Option<&Param<f64>>| -> Result<(Probe, ForwardCtx<f64>)> {
        let refs: Vec<&Tensor<f64>> = inputs.iter().collect();
        let (y, ctx) = forward(spec, param, &refs)?;
        let loss: f64 = y.data().iter().zip(coeffs.data()).map(|(a, b)| a * b).sum();
        let probe = finite(Probe {
            loss,
            kinks: kink_signature([&ctx]),
        })?;
        Ok((probe, ctx))
    };

    let (base, ctx) = eval(&inputs, param.as_ref())?;
    let back = backward(spec, param.as_ref(), &ctx, &coeffs)?;
    let mut report = LayerCheck {
        kind: spec.kind_name(),
        ..LayerCheck::default()
    };

    let mut work = inputs.clone();
    for (i, grad) in back.input_grads.iter().enumerate() {
        for idx in 0..work[i].len() {
            let original = work[i].data()[idx];
            work[i].data_mut()[idx] = original + eps;
            let (plus, _) = eval(&work, param.as_ref())?;
            work[i].data_mut()[idx] = original - eps;
            let (minus, _) = eval(&work, param.as_ref())?;
            work[i].data_mut()[idx] = original;
            if plus.kinks != base.kinks || minus.kinks != base.kinks {
                report.skipped_kinks += 1;
                continue;
            }
            let numeric = (plus.loss - minus.loss) / (2.0 * eps);
            report.max_input_error = report.max_input_error.max(relative_error(grad.data()[idx], numeric));
            report.checked += 1;
        }
    }

    if let (Some(p), Some((gw, gb))) = (param.as_mut(), back.param_grads.as_ref()) {
        for (slot, grad) in [(Slot::Weights, gw), (Slot::Bias, gb)] {
            for idx in 0..grad.len() {
                let original = slot_mut(p, slot).data()[idx];
                slot_mut(p, slot).data_mut()[idx] = original + eps;
                let (plus, _) = eval(&inputs, Some(p))?;
                slot_mut(p, slot).data_mut()[idx] = original - eps;
                let (minus, _) = eval(&inputs, Some(p))?;
                slot_mut(p, slot).data_mut()[idx] = original;
                if plus.kinks != base.kinks || minus.kinks != base.kinks {
                    report.skipped_kinks += 1;
                    continue;
                }
                let numeric = (plus.loss - minus.loss) / (2.0 * eps);
                report.max_param_error = report.max_param_error.max(relative_error(grad.data()[idx], numeric));
                report.checked += 1;
            }
        }
    }
    Ok(report)
}

#[derive(Clone, Debug, Default)]
pub struct LayerCheck {
    pub kind: &'static str,
    pub max_input_error: f64,
    pub max_param_error: f64,
    pub checked: usize,
    pub skipped_kinks: usize,
}

impl LayerCheck {
    pub fn max_error(&self) -> f64 {
        self.max_input_error.max(self.max_param_error)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn linear_set(w: f64) -> ParamSet<f64> {
        let mut set = ParamSet::new();
        set.insert("lin", Param::new(Tensor::full(&[1, 1], w), Tensor::zeros(&[1])))
            .unwrap();
        set
    }

    // y = w·x + b with x = 1.7, loss = y.
    fn linear_eval(flip: bool) -> impl FnMut(&mut ParamSet<f64>, bool) -> Result<Probe> {
        move |params, with_grads| {
            let x = 1.7;
            let p = params.get_mut("lin").unwrap();
            let y = p.weights.data()[0] * x + p.bias.data()[0];
            if with_grads {
                let s = if flip { -1.0 } else { 1.0 };
                p.grad_weights.data_mut()[0] += s * x;
                p.grad_bias.data_mut()[0] += s;
            }
            Ok(Probe { loss: y, kinks: 0 })
        }
    }

    #[test]
    fn linear_model_is_exact() {
        let mut set = linear_set(0.3);
        let r = grad_check(&mut set, linear_eval(false), 1e-3, 4, 0).unwrap();
        assert!(r.max_relative_error < 1e-6, "{r:?}");
        assert_eq!(r.checked, 2);
    }

    #[test]
    fn sign_flip_is_detected() {
        let mut set = linear_set(0.3);
        let r = grad_check(&mut set, linear_eval(true), 1e-3, 4, 0).unwrap();
        assert!((r.max_relative_error - 2.0).abs() < 1e-6, "{r:?}");
    }

    #[test]
    fn rejects_out_of_range_eps_and_nan() {
        let mut set = linear_set(0.3);
        assert!(grad_check(&mut set, linear_eval(false), 1e-6, 4, 0).is_err());
        let nan = |_: &mut ParamSet<f64>, _: bool| Ok(Probe { loss: f64::NAN, kinks: 0 });
        assert!(matches!(
            grad_check(&mut set, nan, 1e-3, 4, 0),
            Err(GazeError::NonFinite(_))
        ));
    }
}
