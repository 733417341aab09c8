//! Procedural faces whose pupils encode the gaze target.
//!
//! Each subject gets a head position, colours, a small pupil bias and a
//! screen size. A frame draws the face, two dark eye regions and a bright
//! Gaussian blob in each eye displaced in proportion to the normalized gaze
//! target. Landmarks are laid out consistently: the face-oval indices on the
//! face ellipse, the eye-contour indices on each eye ellipse, everything else
//! at the face centre.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{GazeError, Result};
use crate::geometry::ScreenGeometry;
use crate::preprocess::landmarks::{FACE_OVAL, LEFT_EYE, NUM_LANDMARKS, RIGHT_EYE};
use crate::preprocess::Frame;
use crate::tensor::Tensor;

pub const FRAME_W: usize = 160;
pub const FRAME_H: usize = 120;

/// Per-frame head movement, in pixels.
const HEAD_SWAY: (f32, f32) = (8.0, 5.0);

const SCREENS: [(f32, f32); 3] = [(1280.0, 800.0), (1440.0, 900.0), (1920.0, 1080.0)];

#[derive(Clone, Debug, PartialEq)]
pub struct SubjectAppearance {
    pub face_center: (f32, f32),
    pub face_radii: (f32, f32),
    /// Horizontal distance of each eye from the face centre, and vertical offset.
    pub eye_offset: (f32, f32),
    pub eye_radii: (f32, f32),
    pub skin: [f32; 3],
    pub background: [f32; 3],
    /// Pupil displacement bias, in normalized gaze units.
    pub bias: (f32, f32),
    pub screen: ScreenGeometry,
}

impl SubjectAppearance {
    pub fn random<R: Rng>(rng: &mut R) -> Self {
        let (w, h) = SCREENS[rng.gen_range(0..SCREENS.len())];
        Self {
            face_center: (rng.gen_range(70.0..90.0), rng.gen_range(55.0..65.0)),
            face_radii: (rng.gen_range(32.0..36.0), rng.gen_range(42.0..46.0)),
            eye_offset: (rng.gen_range(13.0..16.0), rng.gen_range(-12.0..-9.0)),
            eye_radii: (rng.gen_range(9.5..11.0), rng.gen_range(5.5..6.5)),
            skin: [rng.gen_range(150.0..220.0), rng.gen_range(110.0..170.0), rng.gen_range(90.0..140.0)],
            background: [rng.gen_range(20.0..90.0), rng.gen_range(20.0..90.0), rng.gen_range(40.0..120.0)],
            bias: (rng.gen_range(-0.02..0.02), rng.gen_range(-0.02..0.02)),
            screen: ScreenGeometry::new(w, h).expect("positive"),
        }
    }

    /// Eye centres in pixels: (subject's left, subject's right).
    fn eye_centers(&self, head: (f32, f32)) -> [(f32, f32); 2] {
        let (dx, dy) = self.eye_offset;
        [(head.0 + dx, head.1 + dy), (head.0 - dx, head.1 + dy)]
    }

    /// Renders one frame looking at `target` (normalized screen coordinates).
    pub fn render<R: Rng>(&self, target: [f32; 2], rng: &mut R) -> Frame {
        let head = (
            self.face_center.0 + rng.gen_range(-HEAD_SWAY.0..HEAD_SWAY.0),
            self.face_center.1 + rng.gen_range(-HEAD_SWAY.1..HEAD_SWAY.1),
        );
        let eyes = self.eye_centers(head);
        let (erx, ery) = self.eye_radii;
        let pupil = (
            (target[0] + self.bias.0 - 0.5) * 2.0 * 0.6 * erx,
            (target[1] + self.bias.1 - 0.5) * 2.0 * 0.6 * ery,
        );
        let sigma2 = 2.0 * 2.6f32 * 2.6;
        let (frx, fry) = self.face_radii;
        let mut pixels = vec![0.0f32; 3 * FRAME_H * FRAME_W];
        for y in 0..FRAME_H {
            for x in 0..FRAME_W {
                let (px, py) = (x as f32 + 0.5, y as f32 + 0.5);
                let mut rgb = self.background;
                let fx = (px - head.0) / frx;
                let fy = (py - head.1) / fry;
                if fx * fx + fy * fy <= 1.0 {
                    rgb = self.skin;
                }
                for (ex, ey) in eyes {
                    let u = (px - ex) / erx;
                    let v = (py - ey) / ery;
                    if u * u + v * v <= 1.0 {
                        let d2 = (px - ex - pupil.0).powi(2) + (py - ey - pupil.1).powi(2);
                        let glow = 230.0 * (-d2 / sigma2).exp();
                        rgb = [25.0 + glow; 3];
                    }
                }
                for c in 0..3 {
                    let noisy = rgb[c] + rng.gen_range(-3.0..3.0);
                    pixels[(c * FRAME_H + y) * FRAME_W + x] = noisy.round().clamp(0.0, 255.0);
                }
            }
        }
        let rgb = Tensor::new(vec![3, FRAME_H, FRAME_W], pixels).expect("frame shape");
        Frame::new(FRAME_W, FRAME_H, rgb, Some(self.landmarks(head))).expect("frame")
    }

    fn landmarks(&self, head: (f32, f32)) -> Vec<[f32; 2]> {
        let norm = |x: f32, y: f32| [x / FRAME_W as f32, y / FRAME_H as f32];
        let mut pts = vec![norm(head.0, head.1); NUM_LANDMARKS];
        let ring = |idx: &[usize], c: (f32, f32), r: (f32, f32), pts: &mut Vec<[f32; 2]>| {
            let n = idx.len() as f32;
            for (k, &i) in idx.iter().enumerate() {
                let a = k as f32 / n * std::f32::consts::TAU;
                pts[i] = norm(c.0 + r.0 * a.cos(), c.1 + r.1 * a.sin());
            }
        };
        let [left, right] = self.eye_centers(head);
        ring(&FACE_OVAL, head, self.face_radii, &mut pts);
        ring(&LEFT_EYE, left, self.eye_radii, &mut pts);
        ring(&RIGHT_EYE, right, self.eye_radii, &mut pts);
        pts
    }
}

/// One generated subject held in memory.
#[derive(Clone, Debug)]
pub struct SyntheticSubject {
    pub id: String,
    pub appearance: SubjectAppearance,
    pub frames: Vec<Frame>,
    pub gaze_px: Vec<[f32; 2]>,
}

impl SyntheticSubject {
    pub fn targets_norm(&self) -> Vec<[f32; 2]> {
        let s = self.appearance.screen;
        self.gaze_px
            .iter()
            .map(|[x, y]| [(*x as f64 / s.width_px as f64) as f32, (*y as f64 / s.height_px as f64) as f32])
            .collect()
    }
}

/// `n` subjects named `p00`, `p01`, … with `m` frames each. Targets are
/// uniform over the screen, rounded to 0.1 px.
pub fn subjects(n: usize, m: usize, seed: u64) -> Result<Vec<SyntheticSubject>> {
    if n == 0 || m == 0 {
        return Err(GazeError::InvalidArgument("need at least one subject and one sample".into()));
    }
    let mut master = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n);
    for s in 0..n {
        let mut rng = ChaCha8Rng::seed_from_u64(master.gen());
        let appearance = SubjectAppearance::random(&mut rng);
        let (w, h) = (appearance.screen.width_px, appearance.screen.height_px);
        let mut frames = Vec::with_capacity(m);
        let mut gaze_px = Vec::with_capacity(m);
        for _ in 0..m {
            let x = (rng.gen_range(0.0..w) * 10.0).round() / 10.0;
            let y = (rng.gen_range(0.0..h) * 10.0).round() / 10.0;
            frames.push(appearance.render([x / w, y / h], &mut rng));
            gaze_px.push([x, y]);
        }
        out.push(SyntheticSubject {
            id: format!("p{s:02}"),
            appearance,
            frames,
            gaze_px,
        });
    }
    Ok(out)
}
