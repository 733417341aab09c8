//! `train`, `eval` and `gridsearch`.

use std::path::{Path, PathBuf};

use gaze_core::dataset::{group_kfold, load_dataset};
use gaze_core::geometry::Space;
use gaze_core::model::{load_weights_file, save_weights, GazeNet, ModelConfig, Profile};
use gaze_core::nn::LossConfig;
use gaze_core::preprocess::{LandmarkConfig, MeanImages};
use gaze_core::training::{
    cross_validate, evaluate, grid_csv, grid_search, loss_csv, mean_metrics, prepare_subject, EvalMetrics,
    PreparedSubject, TrainConfig,
};
use gaze_core::GazeError;

use crate::error::{write_file, CliError, CliResult};

pub const METRICS_CSV_HEADER: &str = "fold,samples,rmse2d_px,mean_l2_px,l2_over_diagonal_pct";

pub struct TrainArgs {
    pub dataset: PathBuf,
    pub profile: Profile,
    pub beta: f64,
    pub lr: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub folds: usize,
    pub seed: u64,
    pub out: PathBuf,
}

fn prepare(dataset: &Path, config: &ModelConfig, means: &MeanImages) -> CliResult<Vec<PreparedSubject>> {
    let records = load_dataset(dataset)?;
    let subjects = records
        .iter()
        .map(|r| prepare_subject(r, means, config, &LandmarkConfig::default()))
        .collect::<Result<Vec<_>, _>>()?;
    for s in &subjects {
        if s.bundles.is_empty() {
            return Err(CliError::Data(format!("subject {} has no usable frames", s.subject_id)));
        }
    }
    Ok(subjects)
}

fn metrics_row(label: &str, m: &EvalMetrics) -> String {
    format!("{label},{},{},{},{}\n", m.samples, m.rmse2d_px, m.mean_l2_px, m.l2_over_diagonal_pct)
}

fn metrics_csv(rows: &[(String, EvalMetrics)]) -> String {
    let mut s = format!("{METRICS_CSV_HEADER}\n");
    for (label, m) in rows {
        s.push_str(&metrics_row(label, m));
    }
    s
}

fn print_metrics(rows: &[(String, EvalMetrics)]) {
    println!("{:>6} {:>8} {:>12} {:>12} {:>10}", "fold", "samples", "rmse2d_px", "mean_l2_px", "diag_%");
    for (label, m) in rows {
        println!(
            "{label:>6} {:>8} {:>12.3} {:>12.3} {:>10.3}",
            m.samples, m.rmse2d_px, m.mean_l2_px, m.l2_over_diagonal_pct
        );
    }
}

fn check_lr(lr: f64) -> CliResult {
    if lr > 0.0 && lr.is_finite() {
        Ok(())
    } else {
        Err(CliError::Usage(format!("--lr must be positive, got {lr}")))
    }
}

fn fold_weights(out: &Path, k: usize) -> PathBuf {
    out.join(format!("fold_{k}.eyth"))
}

pub fn train(a: &TrainArgs) -> CliResult {
    check_lr(a.lr)?;
    if !(a.beta > 0.0 && a.beta.is_finite()) {
        return Err(CliError::Usage(format!("--beta must be positive, got {}", a.beta)));
    }
    let config = ModelConfig::for_profile(a.profile, Space::NormalizedScreen);
    let means = MeanImages::uniform(&config, 0.5);
    let subjects = prepare(&a.dataset, &config, &means)?;
    let cfg = TrainConfig {
        loss: LossConfig::SmoothL1 { beta: a.beta },
        lr: a.lr,
        epochs: a.epochs,
        batch_size: a.batch_size,
        seed: a.seed,
    };
    let folds = cross_validate(&subjects, &config, a.folds, &cfg)?;
    for f in &folds {
        write_file(&fold_weights(&a.out, f.fold), save_weights(&f.model)?)?;
    }
    write_file(&a.out.join("means.eyth"), means.to_container(&config).encode()?)?;
    write_file(&a.out.join("loss.csv"), loss_csv(&folds))?;
    let mut rows: Vec<(String, EvalMetrics)> = folds.iter().map(|f| (f.fold.to_string(), f.metrics.clone())).collect();
    rows.extend(mean_metrics(&folds).map(|m| ("mean".to_string(), m)));
    write_file(&a.out.join("metrics.csv"), metrics_csv(&rows))?;
    for f in &folds {
        let first = f.curve.first().map_or(f64::NAN, |e| e.train_loss);
        let last = f.curve.last().map_or(f64::NAN, |e| e.train_loss);
        println!("fold {}: val {:?}, train loss {first:.5} -> {last:.5}", f.fold, f.val_subjects);
    }
    print_metrics(&rows);
    Ok(())
}

pub struct EvalArgs {
    pub weights: PathBuf,
    pub dataset: PathBuf,
    pub profile: Profile,
    pub folds: Option<usize>,
    pub seed: u64,
    pub out: Option<PathBuf>,
}

fn load_checked(path: &Path, profile: Profile) -> CliResult<GazeNet<f32>> {
    let model = load_weights_file(path)?;
    let want = ModelConfig::for_profile(profile, model.config().output_space);
    if model.config().fingerprint() != want.fingerprint() {
        return Err(GazeError::Fingerprint {
            expected: want.fingerprint(),
            found: model.config().fingerprint(),
        }
        .into());
    }
    Ok(model)
}

/// A single weights file is scored on every subject. A directory written by
/// `train` is scored fold by fold on each fold's validation subjects.
pub fn eval(a: &EvalArgs) -> CliResult {
    let config = ModelConfig::for_profile(a.profile, Space::NormalizedScreen);
    let means = MeanImages::uniform(&config, 0.5);
    let subjects = prepare(&a.dataset, &config, &means)?;
    let mut rows = Vec::new();
    if a.weights.is_dir() {
        let k = a.folds.ok_or_else(|| CliError::Usage("--folds is required with a weights directory".into()))?;
        let ids: Vec<String> = subjects.iter().map(|s| s.subject_id.clone()).collect();
        let plan = group_kfold(&ids, k, a.seed)?;
        for (i, fold) in plan.folds.iter().enumerate() {
            let model = load_checked(&fold_weights(&a.weights, i), a.profile)?;
            let val: Vec<&PreparedSubject> = subjects.iter().filter(|s| fold.val.contains(&s.subject_id)).collect();
            rows.push((i.to_string(), evaluate(&model, &val)?));
        }
        let n = rows.len() as f64;
        let avg = |f: fn(&EvalMetrics) -> f64| rows.iter().map(|(_, m)| f(m)).sum::<f64>() / n;
        let mean = EvalMetrics {
            samples: rows.iter().map(|(_, m)| m.samples).sum(),
            rmse2d_px: avg(|m| m.rmse2d_px),
            mean_l2_px: avg(|m| m.mean_l2_px),
            l2_over_diagonal_pct: avg(|m| m.l2_over_diagonal_pct),
        };
        rows.push(("mean".into(), mean));
    } else {
        let model = load_checked(&a.weights, a.profile)?;
        if model.config().output_space != Space::NormalizedScreen {
            return Err(CliError::Data("evaluation expects a normalized-screen model".into()));
        }
        let all: Vec<&PreparedSubject> = subjects.iter().collect();
        rows.push(("all".into(), evaluate(&model, &all)?));
    }
    print_metrics(&rows);
    if let Some(out) = &a.out {
        write_file(out, metrics_csv(&rows))?;
    }
    Ok(())
}

pub struct GridArgs {
    pub dataset: PathBuf,
    pub profile: Profile,
    pub betas: Vec<f64>,
    pub lr: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub folds: usize,
    pub seed: u64,
    pub out: PathBuf,
}

pub fn gridsearch(a: &GridArgs) -> CliResult {
    check_lr(a.lr)?;
    let config = ModelConfig::for_profile(a.profile, Space::NormalizedScreen);
    let means = MeanImages::uniform(&config, 0.5);
    let subjects = prepare(&a.dataset, &config, &means)?;
    let cfg = TrainConfig {
        loss: LossConfig::EuclideanMse,
        lr: a.lr,
        epochs: a.epochs,
        batch_size: a.batch_size,
        seed: a.seed,
    };
    let result = grid_search(&subjects, &config, a.folds, &a.betas, &cfg)?;
    write_file(&a.out, grid_csv(&result))?;
    for c in &result.curves {
        let last = c.val_loss.last().copied().unwrap_or(f64::NAN);
        println!("beta {}: final val loss {last}", c.beta);
    }
    println!("best beta {} (val loss {})", result.best_beta, result.best_loss);
    Ok(())
}
