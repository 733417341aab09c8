//! Request and response bodies.

use gaze_core::calibration::{CalibrationReport, FineTuneConfig};
use gaze_core::smoothing::OneEuroConfig;
use serde::{Deserialize, Serialize};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CreateSessionRequest {
    pub width_px: f32,
    pub height_px: f32,
    #[serde(default)]
    pub oneeuro: Option<OneEuroConfig>,
    #[serde(default)]
    pub calibration: Option<FineTuneConfig>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CreateSessionResponse {
    pub schema_version: u32,
    pub session_id: String,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CalibrationSampleIn {
    pub frame_b64: String,
    /// 956 values: x0, y0, x1, y1, ... normalized to the frame.
    #[serde(default)]
    pub landmarks: Option<Vec<f32>>,
    pub target_px: [f32; 2],
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CalibrateRequest {
    pub samples: Vec<CalibrationSampleIn>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CalibrateResponse {
    pub schema_version: u32,
    #[serde(flatten)]
    pub report: CalibrationReport,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PredictRequest {
    pub frame_b64: String,
    #[serde(default)]
    pub landmarks: Option<Vec<f32>>,
    pub timestamp_ms: i64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointPx {
    pub x_px: f32,
    pub y_px: f32,
}

/// How the returned point was derived: model output, then screen pixels.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpaceChain {
    pub model_space: String,
    pub model_x: f32,
    pub model_y: f32,
    pub screen_px: PointPx,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredictResponse {
    pub schema_version: u32,
    pub timestamp_ms: i64,
    pub valid: bool,
    pub face_detected: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub raw: Option<PointPx>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub smoothed: Option<PointPx>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub space_chain: Option<SpaceChain>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct HealthResponse {
    pub schema_version: u32,
    pub status: String,
    pub profile: String,
    pub output_space: String,
    pub fingerprint: String,
    pub uptime_s: f64,
    pub sessions: usize,
}
