use gaze_core::geometry::Space;
use gaze_core::model::gradcheck::{check_network, random_bundle};
use gaze_core::model::{from_container, load_weights, save_weights, to_container, GazeNet, InputBundle, ModelConfig};
use gaze_core::{GazeError, Tensor};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn tiny() -> ModelConfig {
    ModelConfig::tiny(Space::NormalizedScreen)
}

fn bundle(seed: u64, config: &ModelConfig) -> InputBundle<f32> {
    random_bundle(config, &mut ChaCha8Rng::seed_from_u64(seed))
}

#[test]
fn tiny_parameter_count_matches_hand_sum() {
    let conv = |i: usize, o: usize| o * i * 9 + o;
    let fc = |i: usize, o: usize| o * i + o;
    let eye = conv(3, 8) + conv(8, 8) + conv(8, 16) + conv(16, 8);
    // 16 → 8 → 4 after two pools; 8 channels × 4 × 4 per eye.
    let eye_head = fc(2 * 8 * 4 * 4, 128);
    // 32 → 16 → 8; 8 channels × 8 × 8.
    let face = conv(3, 8) + conv(8, 8) + conv(8, 16) + conv(16, 8) + conv(8, 8) + fc(8 * 8 * 8, 128) + fc(128, 64);
    let grid = fc(625, 256) + fc(256, 128);
    let fusion = fc(128 + 64 + 128, 128) + fc(128, 2);
    let total = eye + eye_head + face + grid + fusion;
    assert_eq!(total, 348_170);
    let model = GazeNet::<f32>::build(tiny(), 0).unwrap();
    assert_eq!(model.num_parameters(), total);
}

#[test]
fn zero_network_passes_final_bias() {
    let mut model = GazeNet::<f32>::build(tiny(), 0).unwrap();
    for (_, p) in model.params_mut().iter_mut() {
        p.weights.fill(0.0);
        p.bias.fill(0.0);
    }
    let out = model.params_mut().get_mut("fusion.fc2").unwrap();
    out.bias = Tensor::new(vec![2], vec![0.3, 0.7]).unwrap();
    let p = model.predict(&bundle(1, &tiny())).unwrap();
    assert_eq!((p.x, p.y, p.space), (0.3, 0.7, Space::NormalizedScreen));
}

#[test]
fn eye_branches_share_weights() {
    let config = tiny();
    let mut model = GazeNet::<f32>::build(config.clone(), 3).unwrap();
    let mut b = bundle(2, &config);
    b.right_eye = b.left_eye.clone();
    let (_, trace) = model.forward_trace(&b).unwrap();
    model.params_mut().zero_grads();
    model.backward(&trace, [1.0, 0.0]).unwrap();
    let g = model.params().get("eye.conv1").unwrap().grad_weights.clone();

    // One parameter set serves both eyes.
    let names: Vec<_> = model.params().names().cloned().collect();
    assert!(names.iter().all(|n| !n.starts_with("left") && !n.starts_with("right")));
    assert!(names.contains(&"eye.conv1".to_string()));
    assert!(g.data().iter().any(|v| *v != 0.0));

    model.params_mut().get_mut("eye.conv1").unwrap().weights.data_mut()[0] += 0.5;
    let swapped = InputBundle {
        left_eye: b.right_eye.clone(),
        right_eye: b.left_eye.clone(),
        ..b.clone()
    };
    assert_eq!(model.predict_raw(&b).unwrap(), model.predict_raw(&swapped).unwrap());
}

#[test]
fn swapping_distinct_eye_crops_changes_output() {
    let config = tiny();
    let model = GazeNet::<f32>::build(config.clone(), 3).unwrap();
    let b = bundle(4, &config);
    let swapped = InputBundle {
        left_eye: b.right_eye.clone(),
        right_eye: b.left_eye.clone(),
        ..b.clone()
    };
    assert_ne!(model.predict_raw(&b).unwrap(), model.predict_raw(&swapped).unwrap());
}

#[test]
fn weights_round_trip_bit_exactly() {
    let config = tiny();
    let model = GazeNet::<f32>::build(config.clone(), 9).unwrap();
    let bytes = save_weights(&model).unwrap();
    let loaded = load_weights(&bytes, &config).unwrap();
    for (name, p) in model.params().iter() {
        let q = loaded.params().get(name).unwrap();
        assert_eq!(p.weights, q.weights);
        assert_eq!(p.bias, q.bias);
    }
    for seed in 0..10 {
        let b = bundle(100 + seed, &config);
        assert_eq!(model.predict_raw(&b).unwrap(), loaded.predict_raw(&b).unwrap());
    }
    assert_eq!(save_weights(&loaded).unwrap(), bytes);
}

#[test]
fn missing_tensor_is_named() {
    let config = tiny();
    let model = GazeNet::<f32>::build(config.clone(), 9).unwrap();
    let mut c = to_container(&model);
    c.tensors.retain(|(n, _)| n != "grid.fc1.bias");
    match from_container(&c, &config) {
        Err(GazeError::Container(m)) => assert!(m.contains("grid.fc1.bias"), "{m}"),
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn fingerprint_mismatch_and_truncation_are_rejected() {
    let model = GazeNet::<f32>::build(tiny(), 9).unwrap();
    let bytes = save_weights(&model).unwrap();
    assert!(matches!(
        load_weights(&bytes, &ModelConfig::tiny(Space::CameraCm)),
        Err(GazeError::Fingerprint { .. })
    ));
    assert!(load_weights(&bytes[..bytes.len() - 7], &tiny()).is_err());
}

#[test]
fn full_profile_builds_saves_loads_and_predicts() {
    let config = ModelConfig::full(Space::CameraCm);
    let model = GazeNet::<f32>::build(config.clone(), 1).unwrap();
    let loaded = load_weights(&save_weights(&model).unwrap(), &config).unwrap();
    let b = bundle(5, &config);
    let p = loaded.predict(&b).unwrap();
    assert_eq!(p.space, Space::CameraCm);
    assert!(p.x.abs() <= 25.0 && p.y.abs() <= 25.0);
    assert_eq!(loaded.predict_raw(&b).unwrap(), model.predict_raw(&b).unwrap());
}

#[test]
fn bundle_shape_mismatch_is_rejected() {
    let model = GazeNet::<f32>::build(tiny(), 1).unwrap();
    let mut b = bundle(1, &tiny());
    b.face = Tensor::zeros(&[3, 31, 32]);
    assert!(matches!(model.predict(&b), Err(GazeError::Shape(_))));
}

#[test]
fn tiny_network_gradients_check_out() {
    let report = check_network(&tiny(), 17, 12, false).unwrap();
    assert!(report.max_relative_error < 1e-3, "{report:?}");
    assert_eq!(report.kinds.len(), 6);
    assert!(report.tensors.iter().any(|(n, _)| n == "eye.conv1.weights"));
    assert!(report.elapsed_ms < 60_000);
}

#[test]
fn corrupted_backward_is_detected() {
    let report = check_network(&tiny(), 17, 12, true).unwrap();
    let worst = report
        .tensors
        .iter()
        .filter(|(n, _)| n.starts_with("fusion.fc2"))
        .map(|(_, e)| *e)
        .fold(0.0, f64::max);
    assert!((worst - 2.0).abs() < 1e-3, "{worst}");
    assert!(!report.passed(1e-3));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn outputs_respect_space_ranges(seed in any::<u64>(), scale in 0.1f32..50.0) {
        for space in [Space::NormalizedScreen, Space::CameraCm] {
            let config = ModelConfig::tiny(space);
            let model = GazeNet::<f32>::build(config.clone(), seed).unwrap();
            let mut b = bundle(seed, &config);
            b.face.data_mut().iter_mut().for_each(|v| *v *= scale);
            let p = model.predict(&b).unwrap();
            let (lo, hi) = if space == Space::CameraCm { (-25.0, 25.0) } else { (0.0, 1.0) };
            prop_assert!((lo..=hi).contains(&p.x) && (lo..=hi).contains(&p.y));
            let again = model.predict(&b).unwrap();
            prop_assert_eq!(p.x.to_bits(), again.x.to_bits());
            prop_assert_eq!(p.y.to_bits(), again.y.to_bits());
        }
    }
}
