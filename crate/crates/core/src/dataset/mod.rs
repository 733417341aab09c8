//! Per-subject gaze datasets on disk, subject-disjoint folds and a
//! synthetic generator.
//!
//! ```text
//! root/pXX/annotations.csv   frame_path,x_px,y_px
//! root/pXX/screen.txt        W H
//! root/pXX/frames/*.png      (+ <stem>.landmarks.csv beside each frame)
//! ```

pub mod synth;

use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{GazeError, Result};
use crate::geometry::ScreenGeometry;
use crate::preprocess::wire::{decode_image, encode_png, format_landmarks_text, parse_landmarks_text};
use crate::preprocess::Frame;

pub use synth::SubjectAppearance;

pub const ANNOTATIONS: &str = "annotations.csv";
pub const SCREEN: &str = "screen.txt";
pub const LANDMARK_SUFFIX: &str = ".landmarks.csv";

#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    /// Path relative to the subject directory.
    pub frame_path: PathBuf,
    pub gaze_px: [f32; 2],
}

#[derive(Clone, Debug, PartialEq)]
pub struct SubjectRecord {
    pub subject_id: String,
    pub dir: PathBuf,
    pub screen: ScreenGeometry,
    pub samples: Vec<Sample>,
}

impl SubjectRecord {
    /// Reads a sample's image and, when present, its landmark sidecar.
    pub fn load_frame(&self, sample: &Sample) -> Result<Frame> {
        load_frame(&self.dir.join(&sample.frame_path))
    }
}

/// Sidecar path for a frame: `frames/0001.png` → `frames/0001.landmarks.csv`.
pub fn landmark_path(frame: &Path) -> PathBuf {
    let stem = frame.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    frame.with_file_name(format!("{stem}{LANDMARK_SUFFIX}"))
}

pub fn load_frame(path: &Path) -> Result<Frame> {
    let bytes = fs::read(path).map_err(|e| GazeError::io(path, e))?;
    let (w, h, rgb) = decode_image(&bytes)?;
    let lm_path = landmark_path(path);
    let landmarks = if lm_path.exists() {
        let text = fs::read_to_string(&lm_path).map_err(|e| GazeError::io(&lm_path, e))?;
        Some(parse_landmarks_text(&text)?)
    } else {
        None
    };
    Frame::new(w, h, rgb, landmarks)
}

pub fn save_frame(path: &Path, frame: &Frame) -> Result<()> {
    fs::write(path, encode_png(frame)?).map_err(|e| GazeError::io(path, e))?;
    if let Some(lm) = &frame.landmarks {
        let lm_path = landmark_path(path);
        fs::write(&lm_path, format_landmarks_text(lm)).map_err(|e| GazeError::io(&lm_path, e))?;
    }
    Ok(())
}

/// Parses `screen.txt`: two positive numbers, width then height.
pub fn parse_screen(text: &str) -> Result<ScreenGeometry> {
    let nums: Vec<&str> = text.split_whitespace().collect();
    if nums.len() != 2 {
        return Err(GazeError::parse(SCREEN, 1, format!("expected `W H`, got {} fields", nums.len())));
    }
    let num = |s: &str| {
        s.parse::<f32>()
            .map_err(|_| GazeError::parse(SCREEN, 1, format!("not a number: {s:?}")))
    };
    ScreenGeometry::new(num(nums[0])?, num(nums[1])?)
}

/// Parses `frame_path,x_px,y_px` rows. A first row whose coordinates are not
/// numeric is treated as a header.
pub fn parse_annotations(text: &str) -> Result<Vec<Sample>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(text.as_bytes());
    let mut out = Vec::new();
    for (i, row) in reader.records().enumerate() {
        let line = i as u64 + 1;
        let row = row.map_err(|e| GazeError::parse(ANNOTATIONS, line, e.to_string()))?;
        if row.iter().all(|f| f.is_empty()) {
            continue;
        }
        if row.len() != 3 {
            return Err(GazeError::parse(ANNOTATIONS, line, format!("expected 3 fields, got {}", row.len())));
        }
        let coords = (row[1].parse::<f32>(), row[2].parse::<f32>());
        let (x, y) = match coords {
            (Ok(x), Ok(y)) => (x, y),
            _ if i == 0 => continue,
            _ => return Err(GazeError::parse(ANNOTATIONS, line, "coordinates must be numbers")),
        };
        if !(x.is_finite() && y.is_finite()) {
            return Err(GazeError::parse(ANNOTATIONS, line, "coordinates must be finite"));
        }
        if row[0].is_empty() {
            return Err(GazeError::parse(ANNOTATIONS, line, "empty frame path"));
        }
        out.push(Sample {
            frame_path: PathBuf::from(&row[0]),
            gaze_px: [x, y],
        });
    }
    Ok(out)
}

fn load_subject(dir: &Path, subject_id: String) -> Result<SubjectRecord> {
    let read = |name: &str| {
        let p = dir.join(name);
        fs::read_to_string(&p).map_err(|e| GazeError::io(p, e))
    };
    let screen = parse_screen(&read(SCREEN)?)
        .map_err(|e| GazeError::Dataset(format!("subject {subject_id}: {e}")))?;
    let samples = parse_annotations(&read(ANNOTATIONS)?)
        .map_err(|e| GazeError::Dataset(format!("subject {subject_id}: {e}")))?;
    for (row, s) in samples.iter().enumerate() {
        let [x, y] = s.gaze_px;
        if !(0.0..=screen.width_px).contains(&x) || !(0.0..=screen.height_px).contains(&y) {
            return Err(GazeError::Dataset(format!(
                "subject {subject_id}, row {}: gaze target ({x}, {y}) outside the {}x{} screen",
                row + 1,
                screen.width_px,
                screen.height_px
            )));
        }
        let path = dir.join(&s.frame_path);
        image::image_dimensions(&path).map_err(|e| {
            GazeError::Dataset(format!(
                "subject {subject_id}, row {}: unreadable frame {}: {e}",
                row + 1,
                path.display()
            ))
        })?;
    }
    Ok(SubjectRecord {
        subject_id,
        dir: dir.to_path_buf(),
        screen,
        samples,
    })
}

/// Loads every subject directory under `root`, sorted by id. Directories
/// without `annotations.csv` are skipped.
pub fn load_dataset(root: &Path) -> Result<Vec<SubjectRecord>> {
    let entries = fs::read_dir(root).map_err(|e| GazeError::io(root, e))?;
    let mut dirs = Vec::new();
    for entry in entries {
        let entry = entry.map_err(|e| GazeError::io(root, e))?;
        let path = entry.path();
        if path.is_dir() && path.join(ANNOTATIONS).is_file() {
            dirs.push((entry.file_name().to_string_lossy().into_owned(), path));
        }
    }
    dirs.sort();
    dirs.into_iter().map(|(id, dir)| load_subject(&dir, id)).collect()
}

/// Divides each pixel target by the subject's screen size.
pub fn normalize_targets(record: &SubjectRecord) -> Vec<[f32; 2]> {
    let (w, h) = (record.screen.width_px as f64, record.screen.height_px as f64);
    record
        .samples
        .iter()
        .map(|s| [(s.gaze_px[0] as f64 / w) as f32, (s.gaze_px[1] as f64 / h) as f32])
        .collect()
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Fold {
    pub train: Vec<String>,
    pub val: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct FoldPlan {
    pub folds: Vec<Fold>,
}

/// Subject-disjoint k-fold split: ids are sorted, shuffled by `seed`, then
/// dealt round-robin into validation sets.
pub fn group_kfold(subject_ids: &[String], k: usize, seed: u64) -> Result<FoldPlan> {
    let mut ids = subject_ids.to_vec();
    ids.sort();
    ids.dedup();
    if ids.len() != subject_ids.len() {
        return Err(GazeError::InvalidArgument("subject ids must be unique".into()));
    }
    if k < 2 {
        return Err(GazeError::InvalidArgument(format!("need at least 2 folds, got {k}")));
    }
    if k > ids.len() {
        return Err(GazeError::InvalidArgument(format!(
            "{k} folds requested but only {} subjects",
            ids.len()
        )));
    }
    ids.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut val: Vec<Vec<String>> = vec![Vec::new(); k];
    for (i, id) in ids.iter().enumerate() {
        val[i % k].push(id.clone());
    }
    let folds = val
        .into_iter()
        .map(|mut v| {
            v.sort();
            let mut train: Vec<String> = ids.iter().filter(|id| !v.contains(id)).cloned().collect();
            train.sort();
            Fold { train, val: v }
        })
        .collect();
    Ok(FoldPlan { folds })
}

/// Writes `n` synthetic subjects with `m` samples each under `root`.
pub fn generate_synthetic(root: &Path, n: usize, m: usize, seed: u64) -> Result<()> {
    for subject in synth::subjects(n, m, seed)? {
        let dir = root.join(&subject.id);
        let frames = dir.join("frames");
        fs::create_dir_all(&frames).map_err(|e| GazeError::io(&frames, e))?;
        let screen = subject.appearance.screen;
        let screen_path = dir.join(SCREEN);
        fs::write(&screen_path, format!("{} {}\n", screen.width_px, screen.height_px))
            .map_err(|e| GazeError::io(&screen_path, e))?;

        let mut csv = String::from("frame_path,x_px,y_px\n");
        for (i, (frame, [x, y])) in subject.frames.iter().zip(&subject.gaze_px).enumerate() {
            let rel = format!("frames/{i:04}.png");
            save_frame(&dir.join(&rel), frame)?;
            csv.push_str(&format!("{rel},{x},{y}\n"));
        }
        let ann = dir.join(ANNOTATIONS);
        fs::write(&ann, csv).map_err(|e| GazeError::io(&ann, e))?;
    }
    Ok(())
}
