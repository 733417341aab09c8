#![no_main]

use gaze_core::dataset::{parse_annotations, parse_screen};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let _ = parse_annotations(text);
    if let Ok(s) = parse_screen(text) {
        assert!(s.width_px > 0.0 && s.height_px > 0.0);
    }
});
