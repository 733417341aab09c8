#![no_main]

use gaze_core::preprocess::wire::decode_frame;
use gaze_server::api::{CalibrateRequest, CreateSessionRequest, PredictRequest};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(req) = serde_json::from_slice::<PredictRequest>(data) {
        let _ = decode_frame(&req.frame_b64, req.landmarks.as_deref());
    }
    if let Ok(req) = serde_json::from_slice::<CalibrateRequest>(data) {
        for s in req.samples.iter().take(4) {
            let _ = decode_frame(&s.frame_b64, s.landmarks.as_deref());
        }
    }
    let _ = serde_json::from_slice::<CreateSessionRequest>(data);
});
