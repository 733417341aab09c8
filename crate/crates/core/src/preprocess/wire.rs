//! Frame wire format: base64 PNG/JPEG image plus a flat `478×2` landmark array.

use std::io::Cursor;

use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use image::{ImageFormat, ImageReader, Limits, RgbImage};

use super::landmarks::NUM_LANDMARKS;
use super::Frame;
use crate::error::{GazeError, Result};
use crate::tensor::Tensor;

pub const LANDMARK_VALUES: usize = NUM_LANDMARKS * 2;
const MAX_DIM: u32 = 4096;

pub fn decode_image(bytes: &[u8]) -> Result<(usize, usize, Tensor<f32>)> {
    let mut reader = ImageReader::new(Cursor::new(bytes))
        .with_guessed_format()
        .map_err(|e| GazeError::Image(e.to_string()))?;
    match reader.format() {
        Some(ImageFormat::Png) | Some(ImageFormat::Jpeg) => {}
        _ => return Err(GazeError::Image("expected a PNG or JPEG image".into())),
    }
    let mut limits = Limits::default();
    limits.max_image_width = Some(MAX_DIM);
    limits.max_image_height = Some(MAX_DIM);
    limits.max_alloc = Some(256 << 20);
    reader.limits(limits);
    let img = reader.decode().map_err(|e| GazeError::Image(e.to_string()))?.to_rgb8();
    Ok(rgb_to_tensor(&img))
}

pub fn rgb_to_tensor(img: &RgbImage) -> (usize, usize, Tensor<f32>) {
    let (w, h) = (img.width() as usize, img.height() as usize);
    let raw = img.as_raw();
    let data = Tensor::from_fn(&[3, h, w], |i| {
        let c = i / (h * w);
        let p = i % (h * w);
        raw[p * 3 + c] as f32
    });
    (w, h, data)
}

pub fn tensor_to_rgb(frame: &Frame) -> RgbImage {
    let (w, h) = (frame.width, frame.height);
    let d = frame.rgb.data();
    RgbImage::from_fn(w as u32, h as u32, |x, y| {
        let p = y as usize * w + x as usize;
        let px = |c: usize| d[c * h * w + p].round().clamp(0.0, 255.0) as u8;
        image::Rgb([px(0), px(1), px(2)])
    })
}

pub fn encode_png(frame: &Frame) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    tensor_to_rgb(frame)
        .write_to(&mut Cursor::new(&mut out), ImageFormat::Png)
        .map_err(|e| GazeError::Image(e.to_string()))?;
    Ok(out)
}

pub fn frame_to_base64(frame: &Frame) -> Result<String> {
    Ok(STANDARD.encode(encode_png(frame)?))
}

/// Groups a flat `[x0, y0, x1, y1, ...]` array into points.
pub fn landmarks_from_flat(flat: &[f32]) -> Result<Vec<[f32; 2]>> {
    if flat.len() != LANDMARK_VALUES {
        return Err(GazeError::InvalidArgument(format!(
            "expected {LANDMARK_VALUES} landmark values, got {}",
            flat.len()
        )));
    }
    if flat.iter().any(|v| !v.is_finite()) {
        return Err(GazeError::InvalidArgument("landmarks contain non-finite values".into()));
    }
    Ok(flat.chunks_exact(2).map(|c| [c[0], c[1]]).collect())
}

pub fn landmarks_to_flat(points: &[[f32; 2]]) -> Vec<f32> {
    points.iter().flat_map(|p| [p[0], p[1]]).collect()
}

/// Decodes a wire frame. `landmarks: None` yields a frame without a face.
pub fn decode_frame(image_b64: &str, landmarks: Option<&[f32]>) -> Result<Frame> {
    let bytes = STANDARD
        .decode(image_b64.trim())
        .map_err(|e| GazeError::Image(format!("base64: {e}")))?;
    let (width, height, rgb) = decode_image(&bytes)?;
    let landmarks = landmarks.map(landmarks_from_flat).transpose()?;
    Frame::new(width, height, rgb, landmarks)
}

/// Parses a landmark sidecar: 956 numbers separated by commas and/or whitespace.
pub fn parse_landmarks_text(text: &str) -> Result<Vec<[f32; 2]>> {
    let mut values = Vec::with_capacity(LANDMARK_VALUES);
    for (line_no, line) in text.lines().enumerate() {
        for tok in line.split(|c: char| c == ',' || c.is_whitespace()).filter(|t| !t.is_empty()) {
            let v: f32 = tok.parse().map_err(|_| {
                GazeError::parse("landmarks", line_no as u64 + 1, format!("not a number: {tok:?}"))
            })?;
            values.push(v);
            if values.len() > LANDMARK_VALUES {
                return Err(GazeError::parse("landmarks", line_no as u64 + 1, "too many values"));
            }
        }
    }
    landmarks_from_flat(&values)
}

pub fn format_landmarks_text(points: &[[f32; 2]]) -> String {
    let mut s = landmarks_to_flat(points)
        .iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join(",");
    s.push('\n');
    s
}
