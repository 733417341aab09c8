//! One-Euro low-pass filter for the prediction stream.

use serde::{Deserialize, Serialize};

use crate::error::{GazeError, Result};
use crate::geometry::GazePoint;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OneEuroConfig {
    /// Minimum cutoff frequency in Hz.
    pub min_cutoff: f64,
    /// Cutoff slope per unit of speed.
    pub beta: f64,
    /// Cutoff for the derivative estimate, in Hz.
    pub d_cutoff: f64,
    pub enabled: bool,
}

impl Default for OneEuroConfig {
    fn default() -> Self {
        Self {
            min_cutoff: 1.0,
            beta: 0.007,
            d_cutoff: 1.0,
            enabled: true,
        }
    }
}

impl OneEuroConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.min_cutoff > 0.0 && self.d_cutoff > 0.0 && self.beta >= 0.0)
            || !(self.min_cutoff.is_finite() && self.d_cutoff.is_finite() && self.beta.is_finite())
        {
            return Err(GazeError::InvalidArgument(format!(
                "one-euro parameters need min_cutoff > 0, d_cutoff > 0, beta >= 0; got {self:?}"
            )));
        }
        Ok(())
    }
}

fn alpha(cutoff: f64, dt_s: f64) -> f64 {
    let tau = 1.0 / (2.0 * std::f64::consts::PI * cutoff);
    1.0 / (1.0 + tau / dt_s)
}

#[derive(Clone, Copy, Debug, PartialEq)]
struct Axis {
    value: f64,
    deriv: f64,
}

impl Axis {
    fn update(&mut self, x: f64, dt_s: f64, cfg: &OneEuroConfig) -> f64 {
        let dx = (x - self.value) / dt_s;
        let a_d = alpha(cfg.d_cutoff, dt_s);
        self.deriv += a_d * (dx - self.deriv);
        let cutoff = cfg.min_cutoff + cfg.beta * self.deriv.abs();
        let a = alpha(cutoff, dt_s);
        self.value += a * (x - self.value);
        self.value
    }
}

/// Filter state for one stream of 2D points.
#[derive(Clone, Debug, PartialEq)]
pub struct OneEuroState {
    config: OneEuroConfig,
    last_ms: Option<i64>,
    axes: Option<[Axis; 2]>,
}

impl OneEuroState {
    pub fn new(config: OneEuroConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            config,
            last_ms: None,
            axes: None,
        })
    }

    pub fn config(&self) -> &OneEuroConfig {
        &self.config
    }

    pub fn last_timestamp(&self) -> Option<i64> {
        self.last_ms
    }

    pub fn reset(&mut self) {
        self.last_ms = None;
        self.axes = None;
    }

    /// Filters one point. A timestamp not strictly after the previous one is
    /// rejected and leaves the state untouched. With the filter disabled the
    /// point is returned as is, but timestamps are still checked.
    pub fn filter(&mut self, t_ms: i64, p: &GazePoint) -> Result<GazePoint> {
        if let Some(last) = self.last_ms {
            if t_ms <= last {
                return Err(GazeError::InvalidArgument(format!(
                    "timestamp {t_ms} ms is not after the previous {last} ms"
                )));
            }
        }
        if !(p.x.is_finite() && p.y.is_finite()) {
            return Err(GazeError::NonFinite("gaze point".into()));
        }
        let (x, y) = (p.x as f64, p.y as f64);
        let out = match (&mut self.axes, self.last_ms) {
            (Some(axes), Some(last)) if self.config.enabled => {
                let dt = (t_ms - last) as f64 / 1000.0;
                [axes[0].update(x, dt, &self.config), axes[1].update(y, dt, &self.config)]
            }
            _ => {
                self.axes = Some([Axis { value: x, deriv: 0.0 }, Axis { value: y, deriv: 0.0 }]);
                [x, y]
            }
        };
        if !self.config.enabled {
            self.axes = Some([Axis { value: x, deriv: 0.0 }, Axis { value: y, deriv: 0.0 }]);
        }
        self.last_ms = Some(t_ms);
        Ok(GazePoint {
            x: out[0] as f32,
            y: out[1] as f32,
            timestamp_ms: Some(t_ms),
            ..*p
        })
    }
}
