//! Frame → screen-pixel prediction, shared by the server and offline tools.

use serde::Serialize;

use crate::error::{GazeError, Result};
use crate::geometry::{to_px, GazePoint, ScreenGeometry};
use crate::model::GazeNet;
use crate::preprocess::{make_bundle, Frame, LandmarkConfig, MeanImages};

/// Everything needed to turn a frame into a gaze point.
#[derive(Clone, Debug)]
pub struct Engine {
    pub model: GazeNet<f32>,
    pub means: MeanImages,
    pub landmarks: LandmarkConfig,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FramePrediction {
    /// Clamped output in the model's own space.
    pub model_space: GazePoint,
    pub screen_px: GazePoint,
}

impl Engine {
    pub fn new(model: GazeNet<f32>, means: MeanImages) -> Result<Self> {
        means.check(model.config())?;
        Ok(Self {
            model,
            means,
            landmarks: LandmarkConfig::default(),
        })
    }

    /// `Ok(None)` when no usable face is found in the frame.
    pub fn predict_frame(&self, frame: &Frame, screen: &ScreenGeometry) -> Result<Option<FramePrediction>> {
        let bundle = match make_bundle(frame, &self.means, self.model.config(), &self.landmarks) {
            Ok(b) => b,
            Err(GazeError::NoFace(_) | GazeError::DegenerateBox(_)) => return Ok(None),
            Err(e) => return Err(e),
        };
        let model_space = self.model.predict(&bundle)?;
        let screen_px = to_px(&model_space, screen)?;
        Ok(Some(FramePrediction { model_space, screen_px }))
    }
}
