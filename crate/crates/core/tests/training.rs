use gaze_core::dataset::synth;
use gaze_core::geometry::Space;
use gaze_core::metrics::mean_l2;
use gaze_core::model::{GazeNet, ModelConfig};
use gaze_core::nn::{AdamConfig, LossConfig};
use gaze_core::preprocess::{make_bundle, LandmarkConfig, MeanImages};
use gaze_core::training::{pretrain_synthetic, train_steps};

fn tiny() -> ModelConfig {
    ModelConfig::tiny(Space::NormalizedScreen)
}

#[test]
fn held_out_subject_error_below_tenth_after_200_steps() {
    let config = tiny();
    let means = MeanImages::uniform(&config, 0.5);
    let lm = LandmarkConfig::default();
    let subjects = synth::subjects(12, 20, 7).unwrap();
    let (test, train) = subjects.split_last().unwrap();
    let train: Vec<_> = train.iter().collect();
    let mut model = GazeNet::build(config.clone(), 1).unwrap();
    pretrain_synthetic(&mut model, &train, &means, &lm, AdamConfig::with_lr(2e-3), 8, 200, 3).unwrap();

    let mut preds = Vec::new();
    for f in &test.frames {
        let b = make_bundle(f, &means, &config, &lm).unwrap();
        let p = model.predict(&b).unwrap();
        preds.push([p.x, p.y]);
    }
    let err = mean_l2(&preds, &test.targets_norm()).unwrap();
    assert!(err < 0.1, "held-out mean normalized error {err}");
}

#[test]
fn overfits_one_sample() {
    let config = tiny();
    let means = MeanImages::uniform(&config, 0.5);
    let lm = LandmarkConfig::default();
    let subject = &synth::subjects(1, 1, 21).unwrap()[0];
    let bundle = make_bundle(&subject.frames[0], &means, &config, &lm).unwrap();
    let target = subject.targets_norm()[0];
    let mut model = GazeNet::build(config, 4).unwrap();
    let losses = train_steps(
        &mut model,
        &[&bundle],
        &[target],
        &LossConfig::EuclideanMse,
        AdamConfig::with_lr(1e-3),
        1,
        200,
        0,
    )
    .unwrap();
    assert_eq!(losses.len(), 200);
    let p = model.predict(&bundle).unwrap();
    let d = ((p.x - target[0]).powi(2) + (p.y - target[1]).powi(2)).sqrt();
    assert!(d < 0.01, "distance {d}");
}

#[test]
fn step_training_is_deterministic() {
    let config = tiny();
    let means = MeanImages::uniform(&config, 0.5);
    let lm = LandmarkConfig::default();
    let subjects = synth::subjects(2, 6, 9).unwrap();
    let refs: Vec<_> = subjects.iter().collect();
    let run = || {
        let mut m = GazeNet::build(config.clone(), 2).unwrap();
        let l = pretrain_synthetic(&mut m, &refs, &means, &lm, AdamConfig::with_lr(1e-3), 4, 10, 5).unwrap();
        (l, gaze_core::model::save_weights(&m).unwrap())
    };
    assert_eq!(run(), run());
}
