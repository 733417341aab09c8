#![no_main]

use gaze_core::dotprobe::parse_pairs_csv;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        let _ = parse_pairs_csv(text);
    }
});
