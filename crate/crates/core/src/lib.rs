//! Webcam gaze estimation engine.

pub mod calibration;
pub mod dataset;
pub mod dotprobe;
pub mod error;
pub mod geometry;
pub mod metrics;
pub mod model;
pub mod nn;
pub mod pipeline;
pub mod preprocess;
pub mod smoothing;
pub mod tensor;
pub mod training;

pub use error::{GazeError, Result};
pub use tensor::{Scalar, Tensor};
