//! Replays the checked-in fuzz seeds through the same checks the fuzz targets make.

use std::path::PathBuf;

use gaze_core::calibration::parse_targets_csv;
use gaze_core::dataset::{parse_annotations, parse_screen};
use gaze_core::dotprobe::{format_trial_log, parse_pairs_csv, parse_trial_log};
use gaze_core::metrics::{format_gaze_log, parse_gaze_log};
use gaze_core::model::WeightContainer;
use gaze_core::preprocess::wire::{decode_frame, decode_image, format_landmarks_text, parse_landmarks_text};

fn seeds(target: &str) -> Vec<(String, Vec<u8>)> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fuzz/corpus").join(target);
    let mut out: Vec<_> = std::fs::read_dir(&dir)
        .unwrap_or_else(|e| panic!("{}: {e}", dir.display()))
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().into_string().unwrap(), std::fs::read(e.path()).unwrap())
        })
        .collect();
    out.sort();
    assert!(!out.is_empty(), "no seeds for {target}");
    out
}

fn text(bytes: &[u8]) -> &str {
    std::str::from_utf8(bytes).unwrap()
}

#[test]
fn container_seeds() {
    for (name, bytes) in seeds("container_decode") {
        let r = WeightContainer::decode(&bytes);
        match name.as_str() {
            "small" | "empty" => {
                let c = r.unwrap();
                assert_eq!(c.encode().unwrap(), bytes);
            }
            _ => assert!(r.is_err(), "{name}"),
        }
    }
}

#[test]
fn gaze_log_seeds() {
    for (name, bytes) in seeds("gaze_log") {
        match parse_gaze_log(text(&bytes)) {
            Ok(records) => {
                assert_ne!(name, "bad_field");
                assert_eq!(parse_gaze_log(&format_gaze_log(&records)).unwrap().len(), records.len());
            }
            Err(e) => {
                assert_eq!(name, "bad_field");
                assert!(e.to_string().contains(":1:"), "{e}");
            }
        }
    }
}

#[test]
fn trial_log_seeds() {
    for (_, bytes) in seeds("trial_log") {
        let records = parse_trial_log(text(&bytes)).unwrap();
        assert_eq!(parse_trial_log(&format_trial_log(&records)).unwrap(), records);
    }
}

#[test]
fn frame_seeds() {
    for (name, bytes) in seeds("frame_payload") {
        let ok = match name.as_str() {
            "png" => decode_image(&bytes).is_ok(),
            "png_b64" => decode_frame(text(&bytes), None).is_ok(),
            _ => decode_image(&bytes).is_ok() || std::str::from_utf8(&bytes).is_ok_and(|t| decode_frame(t, None).is_ok()),
        };
        assert_eq!(ok, name.starts_with("png") && name != "png_truncated", "{name}");
    }
}

#[test]
fn landmark_seeds() {
    for (name, bytes) in seeds("landmarks_text") {
        match parse_landmarks_text(text(&bytes)) {
            Ok(points) => assert_eq!(parse_landmarks_text(&format_landmarks_text(&points)).unwrap(), points),
            Err(_) => assert_eq!(name, "short"),
        }
    }
}

#[test]
fn dataset_text_seeds() {
    for (name, bytes) in seeds("annotations") {
        let t = text(&bytes);
        match name.as_str() {
            "screen" => assert_eq!(parse_screen(t).unwrap().width_px, 1440.0),
            "annotations" => assert_eq!(parse_annotations(t).unwrap().len(), 2),
            _ => assert!(parse_annotations(t).is_err(), "{name}"),
        }
    }
}

#[test]
fn catalog_and_target_seeds() {
    for (name, bytes) in seeds("pairs_csv") {
        assert_eq!(parse_pairs_csv(text(&bytes)).is_ok(), name != "one_column", "{name}");
    }
    for (name, bytes) in seeds("targets_csv") {
        match parse_targets_csv(text(&bytes)) {
            Ok(rows) => assert_eq!((name.as_str(), rows.len()), ("thirteen", 13)),
            Err(_) => assert_eq!(name, "duplicate_index"),
        }
    }
}
