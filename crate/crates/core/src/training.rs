//! Mini-batch training on per-subject datasets, cross-validation and the
//! β grid search.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::dataset::synth::SyntheticSubject;
use crate::dataset::{group_kfold, normalize_targets, SubjectRecord};
use crate::error::{GazeError, Result};
use crate::geometry::{to_px, ScreenGeometry, Space};
use crate::metrics::{beta_grid_search, l2_over_diagonal, mean_l2, rmse2d, GridSearchResult};
use crate::model::{GazeNet, InputBundle, ModelConfig};
use crate::nn::{adam_step, AdamConfig, AdamState, LossConfig};
use crate::preprocess::{make_bundle, LandmarkConfig, MeanImages};

/// One gradient step over a batch. Returns the batch loss; a non-finite loss
/// is reported before any parameter changes.
pub fn train_step(
    model: &mut GazeNet<f32>,
    adam: &mut AdamState<f32>,
    bundles: &[&InputBundle<f32>],
    targets: &[[f32; 2]],
    loss: &LossConfig,
) -> Result<f32> {
    model.params_mut().zero_grads();
    let mut preds = Vec::with_capacity(bundles.len());
    let mut traces = Vec::with_capacity(bundles.len());
    for b in bundles {
        let (out, trace) = model.forward_trace(b)?;
        preds.push(out);
        traces.push(trace);
    }
    let (value, grads) = loss.evaluate(&preds, targets)?;
    if !value.is_finite() {
        return Err(GazeError::NonFinite(format!("training loss {value}")));
    }
    for (trace, g) in traces.iter().zip(grads) {
        model.backward(trace, g)?;
    }
    if !model.params().all_finite() {
        return Err(GazeError::NonFinite("parameter gradients".into()));
    }
    adam_step(model.params_mut(), adam)?;
    Ok(value)
}

/// A fixed number of Adam steps over mini-batches, reshuffling after each
/// pass through the data. Returns the per-step losses.
#[allow(clippy::too_many_arguments)]
pub fn train_steps(
    model: &mut GazeNet<f32>,
    bundles: &[&InputBundle<f32>],
    targets: &[[f32; 2]],
    loss: &LossConfig,
    adam: AdamConfig,
    batch_size: usize,
    steps: usize,
    seed: u64,
) -> Result<Vec<f32>> {
    if bundles.is_empty() || bundles.len() != targets.len() {
        return Err(GazeError::InvalidArgument("need matching, non-empty bundles and targets".into()));
    }
    if batch_size == 0 {
        return Err(GazeError::InvalidArgument("batch size must be positive".into()));
    }
    let mut state = AdamState::new(model.params(), adam);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..bundles.len()).collect();
    let mut cursor = order.len();
    let mut losses = Vec::with_capacity(steps);
    for _ in 0..steps {
        let mut batch = Vec::with_capacity(batch_size);
        while batch.len() < batch_size.min(bundles.len()) {
            if cursor == order.len() {
                order.shuffle(&mut rng);
                cursor = 0;
            }
            batch.push(order[cursor]);
            cursor += 1;
        }
        let b: Vec<_> = batch.iter().map(|&i| bundles[i]).collect();
        let t: Vec<_> = batch.iter().map(|&i| targets[i]).collect();
        losses.push(train_step(model, &mut state, &b, &t, loss)?);
    }
    Ok(losses)
}

/// Trains on every frame of in-memory synthetic subjects, targets normalized.
/// Frames without a usable face are skipped.
#[allow(clippy::too_many_arguments)]
pub fn pretrain_synthetic(
    model: &mut GazeNet<f32>,
    subjects: &[&SyntheticSubject],
    means: &MeanImages,
    landmarks: &LandmarkConfig,
    adam: AdamConfig,
    batch_size: usize,
    steps: usize,
    seed: u64,
) -> Result<Vec<f32>> {
    let mut bundles = Vec::new();
    let mut targets = Vec::new();
    for s in subjects {
        for (frame, t) in s.frames.iter().zip(s.targets_norm()) {
            match make_bundle(frame, means, model.config(), landmarks) {
                Ok(b) => {
                    bundles.push(b);
                    targets.push(t);
                }
                Err(GazeError::NoFace(_) | GazeError::DegenerateBox(_)) => {}
                Err(e) => return Err(e),
            }
        }
    }
    let refs: Vec<&InputBundle<f32>> = bundles.iter().collect();
    train_steps(model, &refs, &targets, &LossConfig::EuclideanMse, adam, batch_size, steps, seed)
}

pub const BASE_SUBJECTS: usize = 12;
pub const BASE_FRAMES: usize = 20;
pub const BASE_STEPS: usize = 200;
pub const BASE_LR: f64 = 2e-3;

/// A normalized-screen model pretrained on synthetic subjects, and one more
/// subject it has never seen.
#[derive(Clone, Debug)]
pub struct SyntheticBase {
    pub model: GazeNet<f32>,
    pub means: MeanImages,
    pub held_out: SyntheticSubject,
}

/// Pretrains a fresh model on all but the last of `BASE_SUBJECTS` synthetic
/// subjects for `BASE_STEPS` steps.
pub fn synthetic_base(config: ModelConfig, seed: u64) -> Result<SyntheticBase> {
    if config.output_space != Space::NormalizedScreen {
        return Err(GazeError::InvalidArgument("synthetic pretraining expects a normalized-screen model".into()));
    }
    let means = MeanImages::uniform(&config, 0.5);
    let mut subjects = crate::dataset::synth::subjects(BASE_SUBJECTS, BASE_FRAMES, seed)?;
    let held_out = subjects.pop().expect("at least one subject");
    let train: Vec<&SyntheticSubject> = subjects.iter().collect();
    let mut model = GazeNet::build(config, seed)?;
    pretrain_synthetic(
        &mut model,
        &train,
        &means,
        &LandmarkConfig::default(),
        AdamConfig::with_lr(BASE_LR),
        8,
        BASE_STEPS,
        seed,
    )?;
    Ok(SyntheticBase { model, means, held_out })
}

/// Loss of the current model over a set, without touching gradients.
pub fn evaluate_loss(model: &GazeNet<f32>, bundles: &[&InputBundle<f32>], targets: &[[f32; 2]], loss: &LossConfig) -> Result<f32> {
    let preds = bundles.iter().map(|b| model.predict_raw(b)).collect::<Result<Vec<_>>>()?;
    Ok(loss.evaluate(&preds, targets)?.0)
}

/// A subject's frames turned into network inputs.
#[derive(Clone, Debug)]
pub struct PreparedSubject {
    pub subject_id: String,
    pub screen: ScreenGeometry,
    pub bundles: Vec<InputBundle<f32>>,
    pub targets_norm: Vec<[f32; 2]>,
    pub gaze_px: Vec<[f32; 2]>,
    /// Samples dropped because no face could be located.
    pub skipped: usize,
}

pub fn prepare_subject(
    record: &SubjectRecord,
    means: &MeanImages,
    config: &ModelConfig,
    landmarks: &LandmarkConfig,
) -> Result<PreparedSubject> {
    let norm = normalize_targets(record);
    let mut out = PreparedSubject {
        subject_id: record.subject_id.clone(),
        screen: record.screen,
        bundles: Vec::new(),
        targets_norm: Vec::new(),
        gaze_px: Vec::new(),
        skipped: 0,
    };
    for (sample, t) in record.samples.iter().zip(norm) {
        let frame = record.load_frame(sample)?;
        match make_bundle(&frame, means, config, landmarks) {
            Ok(b) => {
                out.bundles.push(b);
                out.targets_norm.push(t);
                out.gaze_px.push(sample.gaze_px);
            }
            Err(GazeError::NoFace(_) | GazeError::DegenerateBox(_)) => out.skipped += 1,
            Err(e) => return Err(e),
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrainConfig {
    pub loss: LossConfig,
    pub lr: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            loss: LossConfig::SmoothL1 { beta: 0.8 },
            lr: 1e-4,
            epochs: 15,
            batch_size: 8,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EpochLoss {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    /// Mean L2 error on the validation set, in normalized screen units.
    pub val_l2: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EvalMetrics {
    pub samples: usize,
    pub rmse2d_px: f64,
    pub mean_l2_px: f64,
    pub l2_over_diagonal_pct: f64,
}

/// Model predictions as pixels on each sample's own screen.
fn predictions_px(model: &GazeNet<f32>, subjects: &[&PreparedSubject]) -> Result<(Vec<[f32; 2]>, Vec<[f32; 2]>, Vec<ScreenGeometry>)> {
    let (mut preds, mut gts, mut screens) = (Vec::new(), Vec::new(), Vec::new());
    for s in subjects {
        for (b, g) in s.bundles.iter().zip(&s.gaze_px) {
            let p = to_px(&model.predict(b)?, &s.screen)?;
            preds.push([p.x, p.y]);
            gts.push(*g);
            screens.push(s.screen);
        }
    }
    Ok((preds, gts, screens))
}

pub fn evaluate(model: &GazeNet<f32>, subjects: &[&PreparedSubject]) -> Result<EvalMetrics> {
    let (preds, gts, screens) = predictions_px(model, subjects)?;
    if preds.is_empty() {
        return Err(GazeError::Dataset("evaluation set is empty".into()));
    }
    Ok(EvalMetrics {
        samples: preds.len(),
        rmse2d_px: rmse2d(&preds, &gts)?,
        mean_l2_px: mean_l2(&preds, &gts)?,
        l2_over_diagonal_pct: l2_over_diagonal(&preds, &gts, &screens)?,
    })
}

fn flatten<'a>(subjects: &[&'a PreparedSubject]) -> (Vec<&'a InputBundle<f32>>, Vec<[f32; 2]>) {
    let mut b = Vec::new();
    let mut t = Vec::new();
    for s in subjects {
        b.extend(s.bundles.iter());
        t.extend(s.targets_norm.iter().copied());
    }
    (b, t)
}

fn mean_l2_norm(model: &GazeNet<f32>, bundles: &[&InputBundle<f32>], targets: &[[f32; 2]]) -> Result<f64> {
    let preds = bundles.iter().map(|b| model.predict_raw(b)).collect::<Result<Vec<_>>>()?;
    mean_l2(&preds, targets)
}

/// Trains `model` in place on `train`, recording per-epoch losses on `val`.
/// Targets are normalized screen coordinates.
pub fn train_model(
    model: &mut GazeNet<f32>,
    train: &[&PreparedSubject],
    val: &[&PreparedSubject],
    cfg: &TrainConfig,
) -> Result<Vec<EpochLoss>> {
    if model.config().output_space != Space::NormalizedScreen {
        return Err(GazeError::InvalidArgument("training expects a normalized-screen model".into()));
    }
    if cfg.batch_size == 0 {
        return Err(GazeError::InvalidArgument("batch size must be positive".into()));
    }
    let (tb, tt) = flatten(train);
    let (vb, vt) = flatten(val);
    if tb.is_empty() || vb.is_empty() {
        return Err(GazeError::Dataset("empty training or validation split".into()));
    }
    let mut adam = AdamState::new(model.params(), AdamConfig::with_lr(cfg.lr));
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..tb.len()).collect();
    let mut curve = Vec::with_capacity(cfg.epochs);
    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        let mut sum = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            let b: Vec<_> = chunk.iter().map(|&i| tb[i]).collect();
            let t: Vec<_> = chunk.iter().map(|&i| tt[i]).collect();
            sum += train_step(model, &mut adam, &b, &t, &cfg.loss)? as f64 * chunk.len() as f64;
        }
        curve.push(EpochLoss {
            epoch,
            train_loss: sum / tb.len() as f64,
            val_loss: evaluate_loss(model, &vb, &vt, &cfg.loss)? as f64,
            val_l2: mean_l2_norm(model, &vb, &vt)?,
        });
    }
    Ok(curve)
}

#[derive(Clone, Debug)]
pub struct FoldOutcome {
    pub fold: usize,
    pub val_subjects: Vec<String>,
    pub model: GazeNet<f32>,
    pub curve: Vec<EpochLoss>,
    pub metrics: EvalMetrics,
}

/// Trains one fresh model per subject-disjoint fold.
pub fn cross_validate(
    subjects: &[PreparedSubject],
    model_config: &ModelConfig,
    folds: usize,
    cfg: &TrainConfig,
) -> Result<Vec<FoldOutcome>> {
    let ids: Vec<String> = subjects.iter().map(|s| s.subject_id.clone()).collect();
    let plan = group_kfold(&ids, folds, cfg.seed)?;
    let pick = |names: &[String]| -> Vec<&PreparedSubject> {
        subjects.iter().filter(|s| names.contains(&s.subject_id)).collect()
    };
    let mut out = Vec::with_capacity(folds);
    for (k, fold) in plan.folds.iter().enumerate() {
        let (train, val) = (pick(&fold.train), pick(&fold.val));
        let mut model = GazeNet::build(model_config.clone(), cfg.seed.wrapping_add(k as u64))?;
        let fold_cfg = TrainConfig {
            seed: cfg.seed.wrapping_add(1000 + k as u64),
            ..cfg.clone()
        };
        let curve = train_model(&mut model, &train, &val, &fold_cfg)?;
        let metrics = evaluate(&model, &val)?;
        out.push(FoldOutcome {
            fold: k,
            val_subjects: fold.val.clone(),
            model,
            curve,
            metrics,
        });
    }
    Ok(out)
}

/// Mean of each metric over folds.
pub fn mean_metrics(folds: &[FoldOutcome]) -> Option<EvalMetrics> {
    let n = folds.len();
    if n == 0 {
        return None;
    }
    let avg = |f: fn(&EvalMetrics) -> f64| folds.iter().map(|o| f(&o.metrics)).sum::<f64>() / n as f64;
    Some(EvalMetrics {
        samples: folds.iter().map(|o| o.metrics.samples).sum(),
        rmse2d_px: avg(|m| m.rmse2d_px),
        mean_l2_px: avg(|m| m.mean_l2_px),
        l2_over_diagonal_pct: avg(|m| m.l2_over_diagonal_pct),
    })
}

pub const LOSS_CSV_HEADER: &str = "fold,epoch,train_loss,val_loss,val_l2";

pub fn loss_csv(folds: &[FoldOutcome]) -> String {
    let mut s = format!("{LOSS_CSV_HEADER}\n");
    for f in folds {
        for e in &f.curve {
            s.push_str(&format!("{},{},{},{},{}\n", f.fold, e.epoch, e.train_loss, e.val_loss, e.val_l2));
        }
    }
    s
}

/// Cross-validates each β and selects by the fold-averaged validation loss curve.
pub fn grid_search(
    subjects: &[PreparedSubject],
    model_config: &ModelConfig,
    folds: usize,
    betas: &[f64],
    cfg: &TrainConfig,
) -> Result<GridSearchResult> {
    beta_grid_search(betas, |beta| {
        let cfg = TrainConfig {
            loss: LossConfig::SmoothL1 { beta },
            ..cfg.clone()
        };
        let outcomes = match cross_validate(subjects, model_config, folds, &cfg) {
            Ok(o) => o,
            Err(GazeError::NonFinite(_)) => return Ok(vec![f64::NAN; cfg.epochs]),
            Err(e) => return Err(e),
        };
        let mut curve = vec![0.0; cfg.epochs];
        for o in &outcomes {
            for (c, e) in curve.iter_mut().zip(&o.curve) {
                *c += e.val_loss / outcomes.len() as f64;
            }
        }
        Ok(curve)
    })
}

pub const GRID_CSV_HEADER: &str = "beta,epoch,val_loss";

pub fn grid_csv(result: &GridSearchResult) -> String {
    let mut s = format!("{GRID_CSV_HEADER}\n");
    for c in &result.curves {
        for (i, v) in c.val_loss.iter().enumerate() {
            s.push_str(&format!("{},{},{}\n", c.beta, i + 1, v));
        }
    }
    s
}
