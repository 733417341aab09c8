//! Gaze-to-phase alignment and per-session reports.

use serde::Serialize;

use super::{Phase, TrialRecord};
use crate::error::{GazeError, Result};
use crate::geometry::ScreenGeometry;
use crate::metrics::{jitter, roi_accuracy, side_agreement, GazeSample, GazeSeries, Rect, Segment, PAIR_TOLERANCE_MS};

pub const ROI_MARGINS: [f64; 3] = [0.0, 0.05, 0.10];

struct Interval {
    start: i64,
    end: i64,
    segment: Segment,
}

fn intervals(records: &[TrialRecord]) -> Result<Vec<Interval>> {
    let mut out = Vec::with_capacity(records.len() * 3);
    for r in records {
        for phase in [Phase::Fixation, Phase::Stimulus, Phase::Probe] {
            let (start, end) = r.interval(phase).expect("trial phase");
            if start < end {
                out.push(Interval {
                    start,
                    end,
                    segment: Segment::Trial { trial: r.spec.index, phase },
                });
            }
        }
    }
    out.sort_by_key(|i| i.start);
    if out.windows(2).any(|w| w[1].start < w[0].end) {
        return Err(GazeError::InvalidArgument("trial phases overlap".into()));
    }
    Ok(out)
}

fn label(intervals: &[Interval], t: i64) -> Segment {
    let k = intervals.partition_point(|i| i.start <= t);
    match k.checked_sub(1).map(|k| &intervals[k]) {
        Some(i) if t < i.end => i.segment,
        _ => Segment::InterTrial,
    }
}

/// Labels each sample with the trial phase containing its timestamp.
/// Samples outside every phase (breaks, before the first trial) are
/// labelled inter-trial.
pub fn align_gaze(records: &[TrialRecord], gaze: &[GazeSample], screen: ScreenGeometry) -> Result<GazeSeries> {
    let iv = intervals(records)?;
    let labels = gaze.iter().map(|s| label(&iv, s.timestamp_ms)).collect();
    GazeSeries::new(screen, gaze.to_vec(), labels)
}

/// Copies of `records` with per-phase sample counts from `series`.
pub fn count_phases(records: &[TrialRecord], series: &GazeSeries) -> Vec<TrialRecord> {
    let mut out = records.to_vec();
    for r in &mut out {
        r.gaze_counts = Default::default();
        for l in &series.labels {
            if let Segment::Trial { trial, phase } = *l {
                if trial == r.spec.index {
                    match phase {
                        Phase::Fixation => r.gaze_counts.fixation += 1,
                        Phase::Stimulus => r.gaze_counts.stimulus += 1,
                        Phase::Probe => r.gaze_counts.probe += 1,
                        _ => {}
                    }
                }
            }
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RoiAt {
    pub margin: f64,
    pub accuracy: f64,
}

/// Share of a trial's stimulus-phase samples (valid or not) inside each rect.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrialDwell {
    pub trial: usize,
    pub samples: usize,
    pub left: f64,
    pub right: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SourceReport {
    pub source: String,
    pub roi: Vec<RoiAt>,
    pub jitter_px: f64,
    pub dwell: Vec<TrialDwell>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SessionReport {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub side_agreement: Option<f64>,
    pub sources: Vec<SourceReport>,
}

fn rois(records: &[TrialRecord]) -> Vec<Vec<Rect>> {
    let n = records.iter().map(|r| r.spec.index + 1).max().unwrap_or(0);
    let mut out = vec![Vec::new(); n];
    for r in records {
        out[r.spec.index] = vec![r.spec.left_rect, r.spec.right_rect];
    }
    out
}

fn source_report(source: &str, series: &GazeSeries, records: &[TrialRecord]) -> Result<SourceReport> {
    let rois = rois(records);
    let roi = ROI_MARGINS
        .iter()
        .map(|&m| roi_accuracy(series, &rois, m).map(|accuracy| RoiAt { margin: m, accuracy }))
        .collect::<Result<Vec<_>>>()?;
    let jitter_px = jitter(series, Some(Phase::Stimulus))?;
    let dwell = records
        .iter()
        .map(|r| {
            let mut d = TrialDwell {
                trial: r.spec.index,
                samples: 0,
                left: 0.0,
                right: 0.0,
            };
            let (mut l, mut rr) = (0usize, 0usize);
            for (s, lab) in series.samples.iter().zip(&series.labels) {
                if *lab != (Segment::Trial { trial: r.spec.index, phase: Phase::Stimulus }) {
                    continue;
                }
                d.samples += 1;
                if !s.valid {
                    continue;
                }
                if r.spec.left_rect.contains_expanded(s.x, s.y, 0.0, &series.screen) {
                    l += 1;
                } else if r.spec.right_rect.contains_expanded(s.x, s.y, 0.0, &series.screen) {
                    rr += 1;
                }
            }
            if d.samples > 0 {
                d.left = l as f64 / d.samples as f64;
                d.right = rr as f64 / d.samples as f64;
            }
            d
        })
        .collect();
    Ok(SourceReport {
        source: source.to_string(),
        roi,
        jitter_px,
        dwell,
    })
}

/// Agreement (when a second tracker is given), ROI accuracy at each margin,
/// stimulus-phase jitter and per-trial dwell fractions.
pub fn analyze_session(
    a: (&str, &GazeSeries),
    b: Option<(&str, &GazeSeries)>,
    records: &[TrialRecord],
) -> Result<SessionReport> {
    let mut sources = vec![source_report(a.0, a.1, records)?];
    let mut agreement = None;
    if let Some((tag, series)) = b {
        agreement = Some(side_agreement(a.1, series, PAIR_TOLERANCE_MS)?);
        sources.push(source_report(tag, series, records)?);
    }
    Ok(SessionReport {
        side_agreement: agreement,
        sources,
    })
}
