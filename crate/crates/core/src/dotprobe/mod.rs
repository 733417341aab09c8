//! Dot-Probe sessions: stimulus catalog, balanced 96-trial plans, the trial
//! state machine, trial logs and gaze alignment.

mod analysis;
mod machine;

use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{GazeError, Result};
use crate::geometry::ScreenGeometry;
use crate::metrics::{Rect, Side};

pub use analysis::{align_gaze, analyze_session, count_phases, SessionReport, SourceReport, TrialDwell, ROI_MARGINS};
pub use machine::{format_trial_log, parse_trial_log, run_scripted, DotProbeMachine, Event, PhaseCounts, Step, TrialRecord};

pub const TRIALS_PER_SESSION: usize = 96;
pub const BREAK_AFTER: usize = 48;
pub const FIXATION_MIN_MS: i64 = 500;
pub const FIXATION_MAX_MS: i64 = 1500;
pub const STIMULUS_MS: i64 = 2000;
pub const PROBE_TIMEOUT_MS: i64 = 5000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Fixation,
    Stimulus,
    Probe,
    Break,
    Done,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StimulusPair {
    pub negative_id: String,
    pub neutral_id: String,
}

/// Parses `pairs.csv`: `negative_id,neutral_id`, optional header.
pub fn parse_pairs_csv(text: &str) -> Result<Vec<StimulusPair>> {
    const NAME: &str = "pairs.csv";
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(text.as_bytes());
    let mut out = Vec::new();
    for (i, row) in reader.records().enumerate() {
        let line = i as u64 + 1;
        let row = row.map_err(|e| GazeError::parse(NAME, line, e.to_string()))?;
        if row.iter().all(|f| f.is_empty()) {
            continue;
        }
        if i == 0 && row.get(0) == Some("negative_id") {
            continue;
        }
        if row.len() != 2 || row[0].is_empty() || row[1].is_empty() {
            return Err(GazeError::parse(NAME, line, "expected `negative_id,neutral_id`"));
        }
        out.push(StimulusPair {
            negative_id: row[0].to_string(),
            neutral_id: row[1].to_string(),
        });
    }
    Ok(out)
}

/// Reads `pairs.csv` from a stimulus directory.
pub fn load_catalog(dir: &Path) -> Result<Vec<StimulusPair>> {
    let p = dir.join("pairs.csv");
    let text = std::fs::read_to_string(&p).map_err(|e| GazeError::io(&p, e))?;
    parse_pairs_csv(&text)
}

/// Placement of the two stimuli, as fractions of the screen.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Layout {
    pub left_center_x: f32,
    pub right_center_x: f32,
    pub center_y: f32,
    pub width: f32,
    pub height: f32,
}

impl Default for Layout {
    fn default() -> Self {
        Self {
            left_center_x: 0.25,
            right_center_x: 0.75,
            center_y: 0.5,
            width: 0.30,
            height: 0.40,
        }
    }
}

impl Layout {
    /// Left and right stimulus rects in pixels.
    pub fn rects(&self, screen: &ScreenGeometry) -> Result<(Rect, Rect)> {
        let (w, h) = (screen.width_px, screen.height_px);
        let rect = |cx: f32| {
            Rect::new(
                (cx - self.width / 2.0) * w,
                (self.center_y - self.height / 2.0) * h,
                (cx + self.width / 2.0) * w,
                (self.center_y + self.height / 2.0) * h,
            )
        };
        let (l, r) = (rect(self.left_center_x)?, rect(self.right_center_x)?);
        if l.x1 > r.x0 {
            return Err(GazeError::InvalidArgument("stimulus rects overlap".into()));
        }
        Ok((l, r))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialSpec {
    pub index: usize,
    pub left_id: String,
    pub right_id: String,
    pub negative_side: Side,
    pub probe_side: Side,
    pub left_rect: Rect,
    pub right_rect: Rect,
    pub fixation_ms: i64,
}

impl TrialSpec {
    pub fn rect(&self, side: Side) -> Rect {
        match side {
            Side::Left => self.left_rect,
            Side::Right => self.right_rect,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SessionPlan {
    pub screen: ScreenGeometry,
    pub trials: Vec<TrialSpec>,
    pub break_after: usize,
}

/// Draws a balanced plan: every (negative side, probe side) combination
/// appears 24 times, pairs are sampled without replacement, and fixation
/// durations are uniform integers in [500, 1500] ms.
pub fn build_session(catalog: &[StimulusPair], screen: ScreenGeometry, layout: &Layout, seed: u64) -> Result<SessionPlan> {
    if catalog.len() < TRIALS_PER_SESSION {
        return Err(GazeError::InvalidArgument(format!(
            "catalog has {} pairs, a session needs {TRIALS_PER_SESSION}",
            catalog.len()
        )));
    }
    let (left_rect, right_rect) = layout.rects(&screen)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pairs: Vec<&StimulusPair> = catalog.iter().collect();
    pairs.shuffle(&mut rng);
    let mut sides: Vec<(Side, Side)> = [Side::Left, Side::Right]
        .iter()
        .flat_map(|&n| [Side::Left, Side::Right].map(|p| (n, p)))
        .flat_map(|c| std::iter::repeat(c).take(TRIALS_PER_SESSION / 4))
        .collect();
    sides.shuffle(&mut rng);

    let trials = pairs
        .into_iter()
        .zip(sides)
        .enumerate()
        .map(|(index, (pair, (negative_side, probe_side)))| {
            let (left_id, right_id) = match negative_side {
                Side::Left => (pair.negative_id.clone(), pair.neutral_id.clone()),
                Side::Right => (pair.neutral_id.clone(), pair.negative_id.clone()),
            };
            TrialSpec {
                index,
                left_id,
                right_id,
                negative_side,
                probe_side,
                left_rect,
                right_rect,
                fixation_ms: rng.gen_range(FIXATION_MIN_MS..=FIXATION_MAX_MS),
            }
        })
        .collect();
    Ok(SessionPlan {
        screen,
        trials,
        break_after: BREAK_AFTER,
    })
}
