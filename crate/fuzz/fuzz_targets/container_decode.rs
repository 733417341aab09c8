#![no_main]

use gaze_core::model::WeightContainer;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(c) = WeightContainer::decode(data) {
        let bytes = c.encode().expect("decoded container re-encodes");
        let again = WeightContainer::decode(&bytes).expect("re-encoded container decodes");
        assert_eq!(again.encode().unwrap(), bytes);
    }
});
