use std::path::PathBuf;

use gaze_core::preprocess::wire::decode_frame;
use gaze_server::api::{CalibrateRequest, CreateSessionRequest, PredictRequest};

fn seed(name: &str) -> Vec<u8> {
    let p = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fuzz/corpus/api_request").join(name);
    std::fs::read(p).unwrap()
}

#[test]
fn fuzz_seeds_decode() {
    let p: PredictRequest = serde_json::from_slice(&seed("predict")).unwrap();
    let frame = decode_frame(&p.frame_b64, p.landmarks.as_deref()).unwrap();
    assert!(frame.landmarks.is_some());
    let p: PredictRequest = serde_json::from_slice(&seed("predict_no_face")).unwrap();
    assert!(decode_frame(&p.frame_b64, None).unwrap().landmarks.is_none());
    let c: CalibrateRequest = serde_json::from_slice(&seed("calibrate")).unwrap();
    assert_eq!(c.samples.len(), 1);
    let s: CreateSessionRequest = serde_json::from_slice(&seed("session")).unwrap();
    assert_eq!(s.width_px, 1920.0);
}
