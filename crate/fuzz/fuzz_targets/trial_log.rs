#![no_main]

use gaze_core::dotprobe::{format_trial_log, parse_trial_log};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(records) = parse_trial_log(text) {
        let again = parse_trial_log(&format_trial_log(&records)).expect("formatted log parses");
        assert_eq!(again.len(), records.len());
    }
});
