#![no_main]

use gaze_core::calibration::parse_targets_csv;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(rows) = parse_targets_csv(text) {
        for (_, [x, y]) in rows {
            assert!(x.is_finite() && y.is_finite());
        }
    }
});
