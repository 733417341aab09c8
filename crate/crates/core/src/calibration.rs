//! User calibration: 13 screen targets, one frame each, then fine-tuning of
//! every parameter of the session model with Adam on a Euclidean loss.

use std::fs;
use std::path::Path;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::synth::SubjectAppearance;
use crate::dataset::{load_frame, parse_screen, save_frame, SCREEN};
use crate::error::{GazeError, Result};
use crate::geometry::{from_px, to_px, GazePoint, ScreenGeometry, Space};
use crate::metrics::mean_l2;
use crate::model::{GazeNet, InputBundle};
use crate::nn::{AdamConfig, AdamState, LossConfig};
use crate::preprocess::{make_bundle, Frame, LandmarkConfig, MeanImages};
use crate::training::train_step;

pub const MIN_SAMPLES: usize = 4;
pub const TARGETS_CSV: &str = "targets.csv";

/// Default 13-point layout in pixels: a 3×3 grid at 10/50/90 % plus the
/// four points at 30/70 %.
pub fn default_targets(screen: &ScreenGeometry) -> Vec<[f32; 2]> {
    let (w, h) = (screen.width_px, screen.height_px);
    let mut out = Vec::with_capacity(13);
    for fy in [0.1, 0.5, 0.9] {
        for fx in [0.1, 0.5, 0.9] {
            out.push([fx * w, fy * h]);
        }
    }
    for fy in [0.3, 0.7] {
        for fx in [0.3, 0.7] {
            out.push([fx * w, fy * h]);
        }
    }
    out
}

#[derive(Clone, Debug)]
pub struct CalibrationInput {
    pub frame: Frame,
    pub target_px: [f32; 2],
}

/// One rendered frame per default target for a synthetic subject, on that
/// subject's screen.
pub fn synthetic_inputs(subject: &SubjectAppearance, seed: u64) -> Vec<CalibrationInput> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let s = subject.screen;
    default_targets(&s)
        .into_iter()
        .map(|t| CalibrationInput {
            frame: subject.render([t[0] / s.width_px, t[1] / s.height_px], &mut rng),
            target_px: t,
        })
        .collect()
}

#[derive(Clone, Debug)]
pub struct CalibrationSample {
    pub bundle: InputBundle<f32>,
    pub target_px: [f32; 2],
    /// Target in the model's output space.
    pub target_model: [f32; 2],
}

#[derive(Clone, Debug)]
pub struct Assembled {
    pub samples: Vec<CalibrationSample>,
    /// Input indices whose frame had no usable face.
    pub invalid: Vec<usize>,
}

/// Preprocesses calibration frames and maps targets into `space`.
pub fn assemble(
    inputs: &[CalibrationInput],
    screen: &ScreenGeometry,
    space: Space,
    means: &MeanImages,
    config: &crate::model::ModelConfig,
    landmarks: &LandmarkConfig,
) -> Result<Assembled> {
    if inputs.len() < MIN_SAMPLES {
        return Err(GazeError::InvalidArgument(format!(
            "calibration needs at least {MIN_SAMPLES} samples, got {}",
            inputs.len()
        )));
    }
    let mut samples = Vec::with_capacity(inputs.len());
    let mut invalid = Vec::new();
    for (i, input) in inputs.iter().enumerate() {
        let [x, y] = input.target_px;
        if !(0.0..=screen.width_px).contains(&x) || !(0.0..=screen.height_px).contains(&y) {
            return Err(GazeError::InvalidArgument(format!(
                "target {i} ({x}, {y}) lies outside the {}x{} screen",
                screen.width_px, screen.height_px
            )));
        }
        match make_bundle(&input.frame, means, config, landmarks) {
            Ok(bundle) => {
                let t = from_px(&GazePoint::new(x, y, Space::ScreenPx), space, screen)?;
                samples.push(CalibrationSample {
                    bundle,
                    target_px: input.target_px,
                    target_model: [t.x, t.y],
                });
            }
            Err(GazeError::NoFace(_) | GazeError::DegenerateBox(_)) => invalid.push(i),
            Err(e) => return Err(e),
        }
    }
    if invalid.len() * 2 > inputs.len() {
        return Err(GazeError::CalibrationAborted(format!(
            "{} of {} frames have no usable face",
            invalid.len(),
            inputs.len()
        )));
    }
    Ok(Assembled { samples, invalid })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FineTuneConfig {
    pub lr: f64,
    pub epochs: usize,
    /// `None` means full batch.
    pub batch_size: Option<usize>,
}

impl Default for FineTuneConfig {
    fn default() -> Self {
        Self {
            lr: 1e-4,
            epochs: 100,
            batch_size: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Residual {
    pub target_px: [f32; 2],
    pub predicted_px: [f32; 2],
    pub error_px: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CalibrationReport {
    pub n_samples: usize,
    pub invalid_samples: Vec<usize>,
    pub mean_error_px_before: f64,
    pub mean_error_px_after: f64,
    pub residuals: Vec<Residual>,
    pub steps: u64,
    /// Mean training loss per epoch, in the model's output space.
    pub loss_curve: Vec<f64>,
    pub wall_time_ms: u64,
}

/// Predictions in pixels for each sample.
pub fn predict_px(model: &GazeNet<f32>, samples: &[CalibrationSample], screen: &ScreenGeometry) -> Result<Vec<[f32; 2]>> {
    samples
        .iter()
        .map(|s| {
            let p = to_px(&model.predict(&s.bundle)?, screen)?;
            Ok([p.x, p.y])
        })
        .collect()
}

/// Mean pixel error of `model` on the samples.
pub fn mean_error_px(model: &GazeNet<f32>, samples: &[CalibrationSample], screen: &ScreenGeometry) -> Result<f64> {
    let preds = predict_px(model, samples, screen)?;
    let targets: Vec<_> = samples.iter().map(|s| s.target_px).collect();
    mean_l2(&preds, &targets)
}

fn run(
    model: &mut GazeNet<f32>,
    samples: &[CalibrationSample],
    cfg: &FineTuneConfig,
) -> Result<(u64, Vec<f64>)> {
    let mut adam = AdamState::new(model.params(), AdamConfig::with_lr(cfg.lr));
    let batch = cfg.batch_size.unwrap_or(samples.len()).max(1);
    let bundles: Vec<&InputBundle<f32>> = samples.iter().map(|s| &s.bundle).collect();
    let targets: Vec<[f32; 2]> = samples.iter().map(|s| s.target_model).collect();
    let mut curve = Vec::with_capacity(cfg.epochs);
    for _ in 0..cfg.epochs {
        let mut sum = 0.0;
        for (b, t) in bundles.chunks(batch).zip(targets.chunks(batch)) {
            sum += train_step(model, &mut adam, b, t, &LossConfig::EuclideanMse)? as f64 * b.len() as f64;
        }
        curve.push(sum / samples.len() as f64);
    }
    if !model.params().all_finite() {
        return Err(GazeError::NonFinite("parameters after fine-tuning".into()));
    }
    Ok((adam.step_count(), curve))
}

/// Fine-tunes `model` in place. On any failure the model is restored to its
/// exact pre-call weights and the error is returned.
pub fn fine_tune(
    model: &mut GazeNet<f32>,
    assembled: &Assembled,
    screen: &ScreenGeometry,
    cfg: &FineTuneConfig,
) -> Result<CalibrationReport> {
    let samples = &assembled.samples;
    if samples.is_empty() {
        return Err(GazeError::CalibrationAborted("no usable samples".into()));
    }
    if !(cfg.lr >= 0.0 && cfg.lr.is_finite()) {
        return Err(GazeError::InvalidArgument(format!("learning rate must be >= 0, got {}", cfg.lr)));
    }
    let started = Instant::now();
    let before = mean_error_px(model, samples, screen)?;
    let snapshot = model.params().clone();
    let (steps, loss_curve) = match run(model, samples, cfg) {
        Ok(r) => r,
        Err(e) => {
            *model.params_mut() = snapshot;
            return Err(GazeError::CalibrationAborted(e.to_string()));
        }
    };
    model.params_mut().zero_grads();
    let preds = predict_px(model, samples, screen)?;
    let residuals: Vec<Residual> = samples
        .iter()
        .zip(&preds)
        .map(|(s, p)| Residual {
            target_px: s.target_px,
            predicted_px: *p,
            error_px: ((p[0] as f64 - s.target_px[0] as f64).powi(2) + (p[1] as f64 - s.target_px[1] as f64).powi(2)).sqrt(),
        })
        .collect();
    let after = residuals.iter().map(|r| r.error_px).sum::<f64>() / residuals.len() as f64;
    Ok(CalibrationReport {
        n_samples: samples.len(),
        invalid_samples: assembled.invalid.clone(),
        mean_error_px_before: before,
        mean_error_px_after: after,
        residuals,
        steps,
        loss_curve,
        wall_time_ms: started.elapsed().as_millis() as u64,
    })
}

/// Parses `targets.csv`: `index,x_px,y_px`, optional header.
pub fn parse_targets_csv(text: &str) -> Result<Vec<(usize, [f32; 2])>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(text.as_bytes());
    let mut out = Vec::new();
    for (i, row) in reader.records().enumerate() {
        let line = i as u64 + 1;
        let row = row.map_err(|e| GazeError::parse(TARGETS_CSV, line, e.to_string()))?;
        if row.iter().all(|f| f.is_empty()) {
            continue;
        }
        if i == 0 && row.get(0) == Some("index") {
            continue;
        }
        if row.len() != 3 {
            return Err(GazeError::parse(TARGETS_CSV, line, format!("expected 3 fields, got {}", row.len())));
        }
        let index: usize = row[0]
            .parse()
            .map_err(|_| GazeError::parse(TARGETS_CSV, line, format!("bad index {:?}", &row[0])))?;
        let num = |s: &str| {
            s.parse::<f32>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| GazeError::parse(TARGETS_CSV, line, format!("bad coordinate {s:?}")))
        };
        if out.iter().any(|(j, _)| *j == index) {
            return Err(GazeError::parse(TARGETS_CSV, line, format!("duplicate index {index}")));
        }
        out.push((index, [num(&row[1])?, num(&row[2])?]));
    }
    Ok(out)
}

/// Loads a replay directory: `screen.txt`, `targets.csv` and one
/// `target_<i>.png` (plus optional landmark sidecar) per row.
pub fn load_replay(dir: &Path) -> Result<(ScreenGeometry, Vec<CalibrationInput>)> {
    let read = |name: &str| {
        let p = dir.join(name);
        fs::read_to_string(&p).map_err(|e| GazeError::io(p, e))
    };
    let screen = parse_screen(&read(SCREEN)?)?;
    let targets = parse_targets_csv(&read(TARGETS_CSV)?)?;
    let inputs = targets
        .into_iter()
        .map(|(i, target_px)| {
            Ok(CalibrationInput {
                frame: load_frame(&dir.join(format!("target_{i}.png")))?,
                target_px,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((screen, inputs))
}

pub fn write_replay(dir: &Path, screen: &ScreenGeometry, inputs: &[CalibrationInput]) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| GazeError::io(dir, e))?;
    let mut csv = String::from("index,x_px,y_px\n");
    for (i, input) in inputs.iter().enumerate() {
        save_frame(&dir.join(format!("target_{i}.png")), &input.frame)?;
        csv.push_str(&format!("{i},{},{}\n", input.target_px[0], input.target_px[1]));
    }
    let write = |name: &str, text: String| {
        let p = dir.join(name);
        fs::write(&p, text).map_err(|e| GazeError::io(p, e))
    };
    write(TARGETS_CSV, csv)?;
    write(SCREEN, format!("{} {}\n", screen.width_px, screen.height_px))
}
