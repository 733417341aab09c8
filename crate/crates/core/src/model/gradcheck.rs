//! Whole-network and per-layer-kind gradient verification.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{GazeNet, InputBundle, ModelConfig};
use crate::error::Result;
use crate::nn::{check_layer, grad_check, loss_euclidean, Conv2dSpec, LayerSpec, PoolSpec, Probe};
use crate::tensor::{Scalar, Tensor};

pub const FD_EPS: f64 = 1e-3;

#[derive(Clone, Debug, Serialize)]
pub struct KindCheck {
    pub kind: &'static str,
    pub max_relative_error: f64,
    pub checked: usize,
    pub skipped_kinks: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct NetworkCheck {
    /// Isolated checks of each layer kind at the profile's shapes.
    pub kinds: Vec<KindCheck>,
    /// Per parameter tensor of the assembled network.
    pub tensors: Vec<(String, f64)>,
    pub checked: usize,
    pub skipped_kinks: usize,
    pub max_relative_error: f64,
    pub elapsed_ms: u128,
}

impl NetworkCheck {
    pub fn passed(&self, tolerance: f64) -> bool {
        self.max_relative_error < tolerance
    }
}

/// Random crops in [-0.5, 0.5] and a random non-empty binary grid.
pub fn random_bundle<T: Scalar, R: Rng>(config: &ModelConfig, rng: &mut R) -> InputBundle<T> {
    let (eh, ew) = config.eye_size;
    let (fh, fw) = config.face_size;
    let mut crop = |shape: &[usize]| Tensor::from_fn(shape, |_| T::lit(rng.gen_range(-0.5..0.5)));
    let left_eye = crop(&[3, eh, ew]);
    let right_eye = crop(&[3, eh, ew]);
    let face = crop(&[3, fh, fw]);
    let n = config.grid_size;
    let (r0, c0) = (rng.gen_range(0..n / 2), rng.gen_range(0..n / 2));
    let (r1, c1) = (rng.gen_range(r0 + 1..=n), rng.gen_range(c0 + 1..=n));
    let face_grid = Tensor::from_fn(&[n * n], |i| {
        let (r, c) = (i / n, i % n);
        if (r0..r1).contains(&r) && (c0..c1).contains(&c) {
            T::one()
        } else {
            T::zero()
        }
    });
    InputBundle {
        left_eye,
        right_eye,
        face,
        face_grid,
    }
}

fn kind_cases(config: &ModelConfig) -> Vec<(LayerSpec, Vec<Vec<usize>>)> {
    let stage = config.eye_convs[0];
    let (eh, ew) = config.eye_size;
    let conv_in = vec![3, eh.min(10), ew.min(10)];
    vec![
        (
            LayerSpec::Conv2d(Conv2dSpec::square(3, stage.out_channels.min(4), stage.kernel.min(5), 1, stage.padding)),
            vec![conv_in],
        ),
        (LayerSpec::MaxPool2d(PoolSpec { window: 2, stride: 2 }), vec![vec![4, 8, 8]]),
        (LayerSpec::Relu, vec![vec![4, 6, 6]]),
        (
            LayerSpec::FullyConnected {
                in_features: 40,
                out_features: 12,
            },
            vec![vec![40]],
        ),
        (LayerSpec::Flatten, vec![vec![4, 3, 3]]),
        (LayerSpec::Concat, vec![vec![7], vec![5], vec![9]]),
    ]
}

/// Central finite differences in f64 against every parameter tensor of the
/// network under a squared-error loss, plus isolated per-kind checks.
pub fn check_network(
    config: &ModelConfig,
    seed: u64,
    samples_per_tensor: usize,
    inject_fault: bool,
) -> Result<NetworkCheck> {
    let start = Instant::now();
    let mut kinds = Vec::new();
    for (i, (spec, shapes)) in kind_cases(config).into_iter().enumerate() {
        let r = check_layer(&spec, &shapes, FD_EPS, seed.wrapping_add(i as u64))?;
        kinds.push(KindCheck {
            kind: r.kind,
            max_relative_error: r.max_error(),
            checked: r.checked,
            skipped_kinks: r.skipped_kinks,
        });
    }

    let mut net = GazeNet::<f64>::build(config.clone(), seed)?;
    net.set_corrupt_backward(inject_fault);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let bundle: InputBundle<f64> = random_bundle(config, &mut rng);
    let target = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
    let mut params = net.params().clone();
    let report = grad_check(
        &mut params,
        |p, with_grads| {
            std::mem::swap(net.params_mut(), p);
            let result = (|| {
                let (out, trace) = net.forward_trace(&bundle)?;
                let (loss, grad) = loss_euclidean(&[out], &[target])?;
                if with_grads {
                    net.backward(&trace, grad[0])?;
                }
                Ok(Probe {
                    loss,
                    kinks: trace.kink_signature(),
                })
            })();
            std::mem::swap(net.params_mut(), p);
            result
        },
        FD_EPS,
        samples_per_tensor,
        seed,
    )?;

    let max = kinds
        .iter()
        .map(|k| k.max_relative_error)
        .fold(report.max_relative_error, f64::max);
    Ok(NetworkCheck {
        skipped_kinks: report.skipped_kinks + kinds.iter().map(|k| k.skipped_kinks).sum::<usize>(),
        checked: report.checked + kinds.iter().map(|k| k.checked).sum::<usize>(),
        kinds,
        tensors: report.per_tensor,
        max_relative_error: max,
        elapsed_ms: start.elapsed().as_millis(),
    })
}
