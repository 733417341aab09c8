//! Frame + landmarks → network inputs: landmark bounding boxes, bilinear crops,
//! normalization with mean subtraction, and the 25×25 face grid.

pub mod landmarks;
pub mod wire;

use serde::{Deserialize, Serialize};

pub use landmarks::{LandmarkConfig, NUM_LANDMARKS};

use crate::error::{GazeError, Result};
use crate::model::container::WeightContainer;
use crate::model::{InputBundle, ModelConfig};
use crate::tensor::Tensor;

/// An RGB frame (`[3, H, W]`, values 0–255) with optional face-mesh landmarks
/// normalized to the frame.
#[derive(Clone, Debug, PartialEq)]
pub struct Frame {
    pub width: usize,
    pub height: usize,
    pub rgb: Tensor<f32>,
    pub landmarks: Option<Vec<[f32; 2]>>,
}

impl Frame {
    pub fn new(width: usize, height: usize, rgb: Tensor<f32>, landmarks: Option<Vec<[f32; 2]>>) -> Result<Self> {
        if rgb.shape() != [3, height, width] {
            return Err(GazeError::Shape(format!(
                "frame pixels {:?} do not match {width}x{height}",
                rgb.shape()
            )));
        }
        if let Some(l) = &landmarks {
            if l.len() != NUM_LANDMARKS {
                return Err(GazeError::InvalidArgument(format!(
                    "expected {NUM_LANDMARKS} landmarks, got {}",
                    l.len()
                )));
            }
        }
        Ok(Self {
            width,
            height,
            rgb,
            landmarks,
        })
    }
}

/// Axis-aligned box in frame pixels, `x0 < x1`, `y0 < y1`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BBox {
    pub x0: f32,
    pub y0: f32,
    pub x1: f32,
    pub y1: f32,
}

impl BBox {
    pub fn new(x0: f32, y0: f32, x1: f32, y1: f32) -> Result<Self> {
        let b = Self { x0, y0, x1, y1 };
        if !(x0 < x1 && y0 < y1) || ![x0, y0, x1, y1].iter().all(|v| v.is_finite()) {
            return Err(GazeError::DegenerateBox(format!("{b:?}")));
        }
        Ok(b)
    }

    pub fn width(&self) -> f32 {
        self.x1 - self.x0
    }

    pub fn height(&self) -> f32 {
        self.y1 - self.y0
    }

    pub fn center(&self) -> (f32, f32) {
        ((self.x0 + self.x1) / 2.0, (self.y0 + self.y1) / 2.0)
    }

    fn clamp_to(&self, w: f32, h: f32) -> Result<Self> {
        BBox::new(self.x0.max(0.0), self.y0.max(0.0), self.x1.min(w), self.y1.min(h))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FaceBoxes {
    pub left_eye: BBox,
    pub right_eye: BBox,
    pub face: BBox,
}

fn hull_box(frame: &Frame, points: &[[f32; 2]], indices: &[usize], padding: f32, what: &str) -> Result<BBox> {
    if indices.is_empty() {
        return Err(GazeError::InvalidArgument(format!("{what}: empty landmark index set")));
    }
    let (w, h) = (frame.width as f32, frame.height as f32);
    let (mut x0, mut y0) = (f32::INFINITY, f32::INFINITY);
    let (mut x1, mut y1) = (f32::NEG_INFINITY, f32::NEG_INFINITY);
    for &i in indices {
        let p = points
            .get(i)
            .ok_or_else(|| GazeError::InvalidArgument(format!("{what}: landmark index {i} out of range")))?;
        let (px, py) = (p[0].clamp(0.0, 1.0) * w, p[1].clamp(0.0, 1.0) * h);
        x0 = x0.min(px);
        x1 = x1.max(px);
        y0 = y0.min(py);
        y1 = y1.max(py);
    }
    let (bw, bh) = (x1 - x0, y1 - y0);
    if !(bw > 0.0 && bh > 0.0) {
        return Err(GazeError::DegenerateBox(format!("{what} landmark hull has zero area")));
    }
    let (cx, cy) = ((x0 + x1) / 2.0, (y0 + y1) / 2.0);
    let (hw, hh) = (bw * (1.0 + 2.0 * padding) / 2.0, bh * (1.0 + 2.0 * padding) / 2.0);
    BBox::new(cx - hw, cy - hh, cx + hw, cy + hh)?
        .clamp_to(w, h)
        .map_err(|_| GazeError::DegenerateBox(format!("{what} box lies outside the frame")))
}

pub fn extract_bboxes(frame: &Frame, config: &LandmarkConfig) -> Result<FaceBoxes> {
    let points = frame
        .landmarks
        .as_deref()
        .ok_or_else(|| GazeError::NoFace("frame has no landmarks".into()))?;
    Ok(FaceBoxes {
        left_eye: hull_box(frame, points, &config.left_eye, config.eye_padding, "left eye")?,
        right_eye: hull_box(frame, points, &config.right_eye, config.eye_padding, "right eye")?,
        face: hull_box(frame, points, &config.face, config.face_padding, "face")?,
    })
}

/// Crops the whole pixels covered by `bbox` and resizes them bilinearly to
/// `target_h × target_w` (half-pixel centres, edge samples clamped to the crop).
pub fn crop_resize(frame: &Frame, bbox: &BBox, target_h: usize, target_w: usize) -> Result<Tensor<f32>> {
    if target_h == 0 || target_w == 0 {
        return Err(GazeError::InvalidArgument("crop target must be non-empty".into()));
    }
    let bbox = bbox.clamp_to(frame.width as f32, frame.height as f32)?;
    let x0 = bbox.x0.floor() as usize;
    let y0 = bbox.y0.floor() as usize;
    let x1 = (bbox.x1.ceil() as usize).min(frame.width).max(x0 + 1);
    let y1 = (bbox.y1.ceil() as usize).min(frame.height).max(y0 + 1);
    let (cw, ch) = (x1 - x0, y1 - y0);

    let axis = |n_out: usize, n_in: usize| -> Vec<(usize, usize, f32)> {
        let scale = n_in as f32 / n_out as f32;
        (0..n_out)
            .map(|i| {
                let s = ((i as f32 + 0.5) * scale - 0.5).clamp(0.0, (n_in - 1) as f32);
                let lo = s.floor() as usize;
                let hi = (lo + 1).min(n_in - 1);
                (lo, hi, s - lo as f32)
            })
            .collect()
    };
    let xs = axis(target_w, cw);
    let ys = axis(target_h, ch);
    let (fw, fh) = (frame.width, frame.height);
    let src = frame.rgb.data();
    let mut out = Vec::with_capacity(3 * target_h * target_w);
    for c in 0..3 {
        let plane = &src[c * fh * fw..(c + 1) * fh * fw];
        for &(ylo, yhi, ty) in &ys {
            let row_lo = &plane[(y0 + ylo) * fw + x0..];
            let row_hi = &plane[(y0 + yhi) * fw + x0..];
            for &(xlo, xhi, tx) in &xs {
                let top = row_lo[xlo] * (1.0 - tx) + row_lo[xhi] * tx;
                let bottom = row_hi[xlo] * (1.0 - tx) + row_hi[xhi] * tx;
                out.push(top * (1.0 - ty) + bottom * ty);
            }
        }
    }
    Tensor::new(vec![3, target_h, target_w], out)
}

/// `crop / 255 − mean`.
pub fn normalize_and_center(crop: &Tensor<f32>, mean: &Tensor<f32>) -> Result<Tensor<f32>> {
    if crop.shape() != mean.shape() {
        return Err(GazeError::Shape(format!(
            "crop {:?} vs mean image {:?}",
            crop.shape(),
            mean.shape()
        )));
    }
    let data = crop.data().iter().zip(mean.data()).map(|(c, m)| c / 255.0 - m).collect();
    Tensor::new(crop.shape().to_vec(), data)
}

/// 25×25 mask: a cell is set iff its centre lies inside the face box
/// (half-open on the right and bottom). When no centre is covered, the cell
/// under the box centre is set.
pub fn face_grid(face: &BBox, frame_w: usize, frame_h: usize) -> Tensor<f32> {
    let n = crate::model::config::GRID_SIZE;
    let (w, h) = (frame_w as f32, frame_h as f32);
    let mut grid = Tensor::zeros(&[n, n]);
    let mut any = false;
    for i in 0..n {
        let cy = (i as f32 + 0.5) / n as f32 * h;
        if !(face.y0 <= cy && cy < face.y1) {
            continue;
        }
        for j in 0..n {
            let cx = (j as f32 + 0.5) / n as f32 * w;
            if face.x0 <= cx && cx < face.x1 {
                grid.data_mut()[i * n + j] = 1.0;
                any = true;
            }
        }
    }
    if !any {
        let (cx, cy) = face.center();
        let j = ((cx / w * n as f32).floor().max(0.0) as usize).min(n - 1);
        let i = ((cy / h * n as f32).floor().max(0.0) as usize).min(n - 1);
        grid.data_mut()[i * n + j] = 1.0;
    }
    grid
}

/// Per-branch mean images, values in [0, 1], sized for a model's inputs.
#[derive(Clone, Debug, PartialEq)]
pub struct MeanImages {
    pub face: Tensor<f32>,
    pub left_eye: Tensor<f32>,
    pub right_eye: Tensor<f32>,
}

impl MeanImages {
    pub fn uniform(config: &ModelConfig, value: f32) -> Self {
        let (eh, ew) = config.eye_size;
        let (fh, fw) = config.face_size;
        Self {
            face: Tensor::full(&[3, fh, fw], value),
            left_eye: Tensor::full(&[3, eh, ew], value),
            right_eye: Tensor::full(&[3, eh, ew], value),
        }
    }

    pub fn check(&self, config: &ModelConfig) -> Result<()> {
        let (eh, ew) = config.eye_size;
        let (fh, fw) = config.face_size;
        if self.face.shape() != [3, fh, fw]
            || self.left_eye.shape() != [3, eh, ew]
            || self.right_eye.shape() != [3, eh, ew]
        {
            return Err(GazeError::Shape("mean images do not match the model input sizes".into()));
        }
        Ok(())
    }

    pub fn fingerprint(config: &ModelConfig) -> String {
        let (eh, ew) = config.eye_size;
        let (fh, fw) = config.face_size;
        format!("mean-images:eye{eh}x{ew}:face{fh}x{fw}")
    }

    pub fn to_container(&self, config: &ModelConfig) -> WeightContainer {
        WeightContainer {
            fingerprint: Self::fingerprint(config),
            config: None,
            tensors: vec![
                ("mean.face".into(), self.face.clone()),
                ("mean.left_eye".into(), self.left_eye.clone()),
                ("mean.right_eye".into(), self.right_eye.clone()),
            ],
        }
    }

    pub fn from_container(c: &WeightContainer, config: &ModelConfig) -> Result<Self> {
        let expected = Self::fingerprint(config);
        if c.fingerprint != expected {
            return Err(GazeError::Fingerprint {
                expected,
                found: c.fingerprint.clone(),
            });
        }
        let get = |name: &str| {
            c.get(name)
                .cloned()
                .ok_or_else(|| GazeError::Container(format!("missing tensor {name}")))
        };
        let means = Self {
            face: get("mean.face")?,
            left_eye: get("mean.left_eye")?,
            right_eye: get("mean.right_eye")?,
        };
        means.check(config)?;
        Ok(means)
    }
}

/// Full preprocessing of one frame.
pub fn make_bundle(
    frame: &Frame,
    means: &MeanImages,
    config: &ModelConfig,
    landmarks: &LandmarkConfig,
) -> Result<InputBundle<f32>> {
    means.check(config)?;
    let boxes = extract_bboxes(frame, landmarks)?;
    let (eh, ew) = config.eye_size;
    let (fh, fw) = config.face_size;
    let left_eye = normalize_and_center(&crop_resize(frame, &boxes.left_eye, eh, ew)?, &means.left_eye)?;
    let right_eye = normalize_and_center(&crop_resize(frame, &boxes.right_eye, eh, ew)?, &means.right_eye)?;
    let face = normalize_and_center(&crop_resize(frame, &boxes.face, fh, fw)?, &means.face)?;
    let face_grid = face_grid(&boxes.face, frame.width, frame.height).reshape(&[config.grid_cells()])?;
    Ok(InputBundle {
        left_eye,
        right_eye,
        face,
        face_grid,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn blank(w: usize, h: usize) -> Frame {
        Frame::new(w, h, Tensor::zeros(&[3, h, w]), None).unwrap()
    }

    fn with_points(mut frame: Frame, f: impl Fn(usize) -> [f32; 2]) -> Frame {
        frame.landmarks = Some((0..NUM_LANDMARKS).map(f).collect());
        frame
    }

    #[test]
    fn missing_landmarks_is_no_face() {
        let f = blank(64, 48);
        assert!(matches!(
            extract_bboxes(&f, &LandmarkConfig::default()),
            Err(GazeError::NoFace(_))
        ));
    }

    #[test]
    fn collapsed_eye_is_degenerate() {
        let cfg = LandmarkConfig::default();
        let f = with_points(blank(200, 100), |i| {
            if cfg.left_eye.contains(&i) {
                [0.5, 0.5]
            } else {
                [(i % 20) as f32 / 20.0, (i % 7) as f32 / 7.0]
            }
        });
        assert!(matches!(extract_bboxes(&f, &cfg), Err(GazeError::DegenerateBox(_))));
    }

    #[test]
    fn eye_padding_arithmetic() {
        // left-eye hull spans x ∈ [80, 120], y ∈ [40, 60] on a 200×100 frame
        let cfg = LandmarkConfig::default();
        let f = with_points(blank(200, 100), |i| {
            if let Some(k) = cfg.left_eye.iter().position(|&j| j == i) {
                match k % 4 {
                    0 => [0.4, 0.4],
                    1 => [0.6, 0.6],
                    2 => [0.5, 0.45],
                    _ => [0.45, 0.55],
                }
            } else {
                [(i % 20) as f32 / 20.0 + 0.01, (i % 9) as f32 / 9.0 + 0.01]
            }
        });
        let b = extract_bboxes(&f, &cfg).unwrap().left_eye;
        assert!((b.width() - 60.0).abs() < 1e-3 && (b.height() - 30.0).abs() < 1e-3, "{b:?}");
        let (cx, cy) = b.center();
        assert!((cx - 100.0).abs() < 1e-3 && (cy - 50.0).abs() < 1e-3);
    }

    #[test]
    fn solid_region_crops_to_constant() {
        let mut f = blank(40, 30);
        for c in 0..3 {
            for y in 10..20 {
                for x in 5..25 {
                    f.rgb.data_mut()[(c * 30 + y) * 40 + x] = [200.0, 100.0, 50.0][c];
                }
            }
        }
        let b = BBox::new(5.0, 10.0, 25.0, 20.0).unwrap();
        let crop = crop_resize(&f, &b, 7, 13).unwrap();
        for c in 0..3 {
            for v in &crop.data()[c * 91..(c + 1) * 91] {
                assert!((v - [200.0, 100.0, 50.0][c]).abs() < 1e-4);
            }
        }
    }

    #[test]
    fn identity_resize_copies_pixels() {
        let mut f = blank(20, 10);
        f.rgb = Tensor::from_fn(&[3, 10, 20], |i| (i * 7 % 256) as f32);
        let b = BBox::new(3.0, 2.0, 11.0, 8.0).unwrap();
        let crop = crop_resize(&f, &b, 6, 8).unwrap();
        for c in 0..3 {
            for y in 0..6 {
                for x in 0..8 {
                    assert_eq!(crop.at3(c, y, x), f.rgb.at3(c, y + 2, x + 3));
                }
            }
        }
    }

    #[test]
    fn normalize_examples() {
        let crop = Tensor::full(&[3, 2, 2], 255.0);
        let out = normalize_and_center(&crop, &Tensor::full(&[3, 2, 2], 1.0)).unwrap();
        assert!(out.data().iter().all(|v| *v == 0.0));
        let out = normalize_and_center(&Tensor::zeros(&[3, 2, 2]), &Tensor::full(&[3, 2, 2], 0.5)).unwrap();
        assert!(out.data().iter().all(|v| *v == -0.5));
        assert!(normalize_and_center(&crop, &Tensor::zeros(&[3, 2, 3])).is_err());
    }

    #[test]
    fn whole_frame_grid_is_full() {
        let g = face_grid(&BBox::new(0.0, 0.0, 640.0, 480.0).unwrap(), 640, 480);
        assert_eq!(g.data().iter().filter(|v| **v == 1.0).count(), 625);
    }

    #[test]
    fn left_half_grid() {
        let g = face_grid(&BBox::new(0.0, 0.0, 320.0, 480.0).unwrap(), 640, 480);
        for i in 0..25 {
            for j in 0..25 {
                assert_eq!(g.data()[i * 25 + j] == 1.0, j <= 11, "cell ({i}, {j})");
            }
        }
    }

    #[test]
    fn tiny_box_still_marks_one_cell() {
        let g = face_grid(&BBox::new(1.0, 1.0, 2.0, 2.0).unwrap(), 640, 480);
        assert_eq!(g.data().iter().filter(|v| **v == 1.0).count(), 1);
        assert_eq!(g.data()[0], 1.0);
    }

    #[test]
    fn bbox_validation() {
        assert!(BBox::new(1.0, 1.0, 1.0, 2.0).is_err());
        assert!(BBox::new(0.0, 0.0, f32::NAN, 2.0).is_err());
    }
}
