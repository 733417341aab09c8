//! `calibrate`, `analyze`, `gradcheck`, `synth` and `init-weights`.

use std::path::{Path, PathBuf};

use gaze_core::calibration::{assemble, fine_tune, load_replay, synthetic_inputs, write_replay, FineTuneConfig};
use gaze_core::dataset::{generate_synthetic, synth};
use gaze_core::dotprobe::{align_gaze, analyze_session, parse_trial_log};
use gaze_core::geometry::{ScreenGeometry, Space};
use gaze_core::metrics::{parse_gaze_log, GazeSample};
use gaze_core::model::gradcheck::check_network;
use gaze_core::model::{load_weights_file, save_weights, GazeNet, ModelConfig, Profile, WeightContainer};
use gaze_core::preprocess::{LandmarkConfig, MeanImages};
use gaze_core::training::{synthetic_base, BASE_FRAMES, BASE_SUBJECTS};
use gaze_core::GazeError;

use crate::error::{write_file, CliError, CliResult};

fn read_text(path: &Path) -> CliResult<String> {
    std::fs::read_to_string(path).map_err(|e| GazeError::io(path, e).into())
}

fn read_means(path: Option<&Path>, config: &ModelConfig) -> CliResult<MeanImages> {
    match path {
        Some(p) => {
            let bytes = std::fs::read(p).map_err(|e| GazeError::io(p, e))?;
            Ok(MeanImages::from_container(&WeightContainer::decode(&bytes)?, config)?)
        }
        None => Ok(MeanImages::uniform(config, 0.5)),
    }
}

pub struct CalibrateArgs {
    pub weights: PathBuf,
    pub means: Option<PathBuf>,
    pub replay: PathBuf,
    pub lr: f64,
    pub epochs: usize,
    pub out: Option<PathBuf>,
    pub weights_out: Option<PathBuf>,
}

/// Replays a recorded calibration against base weights.
pub fn calibrate(a: &CalibrateArgs) -> CliResult {
    let mut model = load_weights_file(&a.weights)?;
    let means = read_means(a.means.as_deref(), model.config())?;
    let (screen, inputs) = load_replay(&a.replay)?;
    let space = model.config().output_space;
    let assembled = assemble(&inputs, &screen, space, &means, model.config(), &LandmarkConfig::default())?;
    let cfg = FineTuneConfig {
        lr: a.lr,
        epochs: a.epochs,
        batch_size: None,
    };
    let report = fine_tune(&mut model, &assembled, &screen, &cfg)?;
    println!(
        "{} samples ({} invalid): mean error {:.2} px -> {:.2} px",
        report.n_samples,
        report.invalid_samples.len(),
        report.mean_error_px_before,
        report.mean_error_px_after
    );
    eprintln!("fine-tuning took {} ms over {} steps", report.wall_time_ms, report.steps);
    if let Some(out) = &a.out {
        let mut v = serde_json::to_value(&report).map_err(|e| CliError::Internal(e.to_string()))?;
        if let Some(obj) = v.as_object_mut() {
            obj.remove("wall_time_ms");
        }
        write_file(out, serde_json::to_string_pretty(&v).unwrap() + "\n")?;
    }
    if let Some(w) = &a.weights_out {
        write_file(w, save_weights(&model)?)?;
    }
    Ok(())
}

pub struct AnalyzeArgs {
    pub trials: PathBuf,
    pub gaze_a: PathBuf,
    pub gaze_b: Option<PathBuf>,
    pub screen: ScreenGeometry,
    pub out: Option<PathBuf>,
}

fn load_series(
    path: &Path,
    fallback: &str,
    records: &[gaze_core::dotprobe::TrialRecord],
    screen: ScreenGeometry,
) -> CliResult<(String, gaze_core::metrics::GazeSeries)> {
    let log = parse_gaze_log(&read_text(path)?).map_err(|e| with_path(e, path))?;
    let tag = log
        .first()
        .map(|r| r.source.clone())
        .filter(|s| !s.is_empty())
        .unwrap_or_else(|| fallback.to_string());
    let samples: Vec<GazeSample> = log.iter().map(GazeSample::from).collect();
    Ok((tag, align_gaze(records, &samples, screen)?))
}

fn with_path(e: GazeError, path: &Path) -> GazeError {
    match e {
        GazeError::Parse { line, message, .. } => GazeError::parse(path.display().to_string(), line, message),
        other => other,
    }
}

pub fn analyze(a: &AnalyzeArgs) -> CliResult {
    let records = parse_trial_log(&read_text(&a.trials)?).map_err(|e| with_path(e, &a.trials))?;
    let (tag_a, series_a) = load_series(&a.gaze_a, "a", &records, a.screen)?;
    let b = match &a.gaze_b {
        Some(p) => Some(load_series(p, "b", &records, a.screen)?),
        None => None,
    };
    let report = analyze_session(
        (&tag_a, &series_a),
        b.as_ref().map(|(t, s)| (t.as_str(), s)),
        &records,
    )?;
    let text = serde_json::to_string_pretty(&report).map_err(|e| CliError::Internal(e.to_string()))? + "\n";
    print!("{text}");
    if let Some(out) = &a.out {
        write_file(out, &text)?;
    }
    Ok(())
}

pub struct GradcheckArgs {
    pub profile: Profile,
    pub seed: u64,
    pub samples: usize,
    pub tolerance: f64,
    pub inject_fault: bool,
}

pub fn gradcheck(a: &GradcheckArgs) -> CliResult {
    let config = ModelConfig::for_profile(a.profile, Space::CameraCm);
    let check = check_network(&config, a.seed, a.samples, a.inject_fault)?;
    println!("{:<28} {:>14} {:>8} {:>6}", "layer", "max_rel_error", "checked", "kinks");
    for k in &check.kinds {
        println!("{:<28} {:>14.3e} {:>8} {:>6}", k.kind, k.max_relative_error, k.checked, k.skipped_kinks);
    }
    for (name, err) in &check.tensors {
        println!("{name:<28} {err:>14.3e}");
    }
    let verdict = if check.passed(a.tolerance) { "PASS" } else { "FAIL" };
    println!(
        "{verdict}: max relative error {:.3e} (tolerance {:.0e}), {} checked, {} kinks skipped",
        check.max_relative_error, a.tolerance, check.checked, check.skipped_kinks
    );
    eprintln!("gradient check took {} ms", check.elapsed_ms);
    if check.passed(a.tolerance) {
        Ok(())
    } else {
        Err(CliError::Internal(format!(
            "gradient check failed: {:.3e} >= {:.0e}",
            check.max_relative_error, a.tolerance
        )))
    }
}

pub enum SynthKind {
    Dataset { subjects: usize, frames: usize },
    Replay,
}

/// `Replay` renders calibration frames for the subject that
/// `init-weights --pretrained` holds out under the same seed.
pub fn synth(kind: SynthKind, seed: u64, out: &Path) -> CliResult {
    match kind {
        SynthKind::Dataset { subjects, frames } => {
            generate_synthetic(out, subjects, frames, seed)?;
            println!("wrote {subjects} subjects x {frames} frames to {}", out.display());
        }
        SynthKind::Replay => {
            let subject = synth::subjects(BASE_SUBJECTS, BASE_FRAMES, seed)?
                .pop()
                .ok_or_else(|| CliError::Internal("no synthetic subject".into()))?;
            let inputs = synthetic_inputs(&subject.appearance, seed);
            write_replay(out, &subject.appearance.screen, &inputs)?;
            println!("wrote {} calibration frames to {}", inputs.len(), out.display());
        }
    }
    Ok(())
}

pub fn init_weights(profile: Profile, space: Space, seed: u64, pretrained: bool, out: &Path) -> CliResult {
    let config = ModelConfig::for_profile(profile, space);
    let (model, means) = if pretrained {
        let base = synthetic_base(config, seed)?;
        (base.model, base.means)
    } else {
        let means = MeanImages::uniform(&config, 0.5);
        (GazeNet::build(config, seed)?, means)
    };
    write_file(out, save_weights(&model)?)?;
    write_file(&out.with_extension("means.eyth"), means.to_container(model.config()).encode()?)?;
    println!(
        "wrote {} ({} profile, {}, {} parameters)",
        out.display(),
        model.config().profile,
        model.config().output_space.name(),
        model.params().num_values()
    );
    Ok(())
}
