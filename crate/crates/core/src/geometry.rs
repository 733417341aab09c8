//! Coordinate spaces and the conversions between them.
//!
//! Every [`GazePoint`] carries its space, and each conversion rejects points
//! in the wrong one. Out-of-range values are converted, then clamped.

use serde::{Deserialize, Serialize};

use crate::error::{GazeError, Result};

/// Half-extent of the camera-centred metric prediction space, in cm.
pub const CM_HALF_SPAN: f32 = 25.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Space {
    CameraCm,
    NormalizedScreen,
    ScreenPx,
}

impl Space {
    pub fn name(self) -> &'static str {
        match self {
            Space::CameraCm => "camera_cm",
            Space::NormalizedScreen => "normalized_screen",
            Space::ScreenPx => "screen_px",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScreenGeometry {
    pub width_px: f32,
    pub height_px: f32,
}

impl ScreenGeometry {
    pub fn new(width_px: f32, height_px: f32) -> Result<Self> {
        if !(width_px > 0.0 && height_px > 0.0 && width_px.is_finite() && height_px.is_finite()) {
            return Err(GazeError::InvalidArgument(format!(
                "screen dimensions must be positive, got {width_px}x{height_px}"
            )));
        }
        Ok(Self { width_px, height_px })
    }

    pub fn diagonal(&self) -> f64 {
        (self.width_px as f64).hypot(self.height_px as f64)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GazePoint {
    pub x: f32,
    pub y: f32,
    pub space: Space,
    pub timestamp_ms: Option<i64>,
    pub valid: bool,
}

impl GazePoint {
    pub fn new(x: f32, y: f32, space: Space) -> Self {
        Self {
            x,
            y,
            space,
            timestamp_ms: None,
            valid: true,
        }
    }

    pub fn at(mut self, timestamp_ms: i64) -> Self {
        self.timestamp_ms = Some(timestamp_ms);
        self
    }

    /// Clamps into the range of the point's space. Pixel points need the
    /// screen; `None` leaves them untouched.
    pub fn clamped(mut self, screen: Option<&ScreenGeometry>) -> Self {
        let (lo_x, hi_x, lo_y, hi_y) = match (self.space, screen) {
            (Space::CameraCm, _) => (-CM_HALF_SPAN, CM_HALF_SPAN, -CM_HALF_SPAN, CM_HALF_SPAN),
            (Space::NormalizedScreen, _) => (0.0, 1.0, 0.0, 1.0),
            (Space::ScreenPx, Some(s)) => (0.0, s.width_px, 0.0, s.height_px),
            (Space::ScreenPx, None) => return self,
        };
        self.x = self.x.clamp(lo_x, hi_x);
        self.y = self.y.clamp(lo_y, hi_y);
        self
    }

    fn expect(&self, space: Space) -> Result<()> {
        if self.space != space {
            return Err(GazeError::WrongSpace {
                expected: space.name(),
                actual: self.space.name(),
            });
        }
        Ok(())
    }

    fn with(self, x: f32, y: f32, space: Space) -> Self {
        Self { x, y, space, ..self }
    }
}

/// Camera-centred centimetres to screen pixels (vertical axis flips).
pub fn cm_to_px(p: &GazePoint, screen: &ScreenGeometry) -> Result<GazePoint> {
    p.expect(Space::CameraCm)?;
    let span = 2.0 * CM_HALF_SPAN as f64;
    let x = (CM_HALF_SPAN as f64 + p.x as f64) / span * screen.width_px as f64;
    let y = (CM_HALF_SPAN as f64 - p.y as f64) / span * screen.height_px as f64;
    Ok(p.with(x as f32, y as f32, Space::ScreenPx).clamped(Some(screen)))
}

pub fn px_to_cm(p: &GazePoint, screen: &ScreenGeometry) -> Result<GazePoint> {
    p.expect(Space::ScreenPx)?;
    let span = 2.0 * CM_HALF_SPAN as f64;
    let x = span * p.x as f64 / screen.width_px as f64 - CM_HALF_SPAN as f64;
    let y = CM_HALF_SPAN as f64 - span * p.y as f64 / screen.height_px as f64;
    Ok(p.with(x as f32, y as f32, Space::CameraCm).clamped(None))
}

pub fn norm_to_px(p: &GazePoint, screen: &ScreenGeometry) -> Result<GazePoint> {
    p.expect(Space::NormalizedScreen)?;
    let x = p.x as f64 * screen.width_px as f64;
    let y = p.y as f64 * screen.height_px as f64;
    Ok(p.with(x as f32, y as f32, Space::ScreenPx).clamped(Some(screen)))
}

pub fn px_to_norm(p: &GazePoint, screen: &ScreenGeometry) -> Result<GazePoint> {
    p.expect(Space::ScreenPx)?;
    let x = p.x as f64 / screen.width_px as f64;
    let y = p.y as f64 / screen.height_px as f64;
    Ok(p.with(x as f32, y as f32, Space::NormalizedScreen).clamped(None))
}

/// Converts any point to screen pixels.
pub fn to_px(p: &GazePoint, screen: &ScreenGeometry) -> Result<GazePoint> {
    match p.space {
        Space::CameraCm => cm_to_px(p, screen),
        Space::NormalizedScreen => norm_to_px(p, screen),
        Space::ScreenPx => Ok(p.clamped(Some(screen))),
    }
}

/// Converts a pixel point into `space`.
pub fn from_px(p: &GazePoint, space: Space, screen: &ScreenGeometry) -> Result<GazePoint> {
    match space {
        Space::CameraCm => px_to_cm(p, screen),
        Space::NormalizedScreen => px_to_norm(p, screen),
        Space::ScreenPx => {
            p.expect(Space::ScreenPx)?;
            Ok(p.clamped(Some(screen)))
        }
    }
}
