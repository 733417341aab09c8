#![no_main]

use gaze_core::metrics::{format_gaze_log, parse_gaze_log};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(records) = parse_gaze_log(text) {
        let again = parse_gaze_log(&format_gaze_log(&records)).expect("formatted log parses");
        assert_eq!(again.len(), records.len());
    }
});
