#![no_main]

use gaze_core::preprocess::wire::{decode_frame, decode_image};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let _ = decode_image(data);
    if let Ok(text) = std::str::from_utf8(data) {
        let _ = decode_frame(text, None);
    }
});
