#![no_main]

use gaze_core::preprocess::wire::{format_landmarks_text, landmarks_from_flat, parse_landmarks_text};
use gaze_core::preprocess::NUM_LANDMARKS;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(points) = parse_landmarks_text(text) {
        assert_eq!(points.len(), NUM_LANDMARKS);
        assert_eq!(parse_landmarks_text(&format_landmarks_text(&points)).unwrap(), points);
    }
    let floats: Vec<f32> = data
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect();
    let _ = landmarks_from_flat(&floats);
});
