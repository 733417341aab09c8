//! Index sets into the 478-point face-mesh topology.
//!
//! "Left" and "right" are the subject's own sides, so on an unmirrored camera
//! frame the left eye appears on the image's right.

use serde::{Deserialize, Serialize};

pub const NUM_LANDMARKS: usize = 478;

pub const LEFT_EYE: [usize; 16] = [
    263, 249, 390, 373, 374, 380, 381, 382, 362, 466, 388, 387, 386, 385, 384, 398,
];

pub const RIGHT_EYE: [usize; 16] = [
    33, 7, 163, 144, 145, 153, 154, 155, 133, 246, 161, 160, 159, 158, 157, 173,
];

pub const FACE_OVAL: [usize; 36] = [
    10, 338, 297, 332, 284, 251, 389, 356, 454, 323, 361, 288, 397, 365, 379, 378, 400, 377, 152, 148, 176, 149, 150,
    136, 172, 58, 132, 93, 234, 127, 162, 21, 54, 103, 67, 109,
];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LandmarkConfig {
    pub left_eye: Vec<usize>,
    pub right_eye: Vec<usize>,
    pub face: Vec<usize>,
    /// Fraction of the hull size added on each side.
    pub eye_padding: f32,
    pub face_padding: f32,
}

impl Default for LandmarkConfig {
    fn default() -> Self {
        Self {
            left_eye: LEFT_EYE.to_vec(),
            right_eye: RIGHT_EYE.to_vec(),
            face: FACE_OVAL.to_vec(),
            eye_padding: 0.25,
            face_padding: 0.10,
        }
    }
}
