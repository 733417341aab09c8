//! Trial state machine and the line-delimited trial log.
//!
//! Phase boundaries are scheduled times: a tick past a deadline moves to the
//! next phase with the onset set to the deadline itself, so durations are
//! exact regardless of the tick rate. Each event causes at most one
//! transition. Phases are half-open intervals `[onset, offset)`.

use serde::{Deserialize, Serialize};

use super::{Phase, SessionPlan, TrialSpec, PROBE_TIMEOUT_MS, STIMULUS_MS};
use crate::error::{GazeError, Result};

#[derive(Clone, Debug, PartialEq)]
pub enum Event {
    Tick(i64),
    Key { key: String, t_ms: i64 },
}

impl Event {
    pub fn time(&self) -> i64 {
        match self {
            Event::Tick(t) => *t,
            Event::Key { t_ms, .. } => *t_ms,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhaseCounts {
    pub fixation: usize,
    pub stimulus: usize,
    pub probe: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub spec: TrialSpec,
    pub fixation_onset_ms: i64,
    pub fixation_offset_ms: i64,
    pub stimulus_onset_ms: i64,
    pub stimulus_offset_ms: i64,
    pub probe_onset_ms: i64,
    pub probe_offset_ms: i64,
    pub response_key: Option<String>,
    pub response_time_ms: Option<i64>,
    pub anticipatory_keys: u32,
    #[serde(default)]
    pub gaze_counts: PhaseCounts,
}

impl TrialRecord {
    pub fn fixation_ms(&self) -> i64 {
        self.fixation_offset_ms - self.fixation_onset_ms
    }

    pub fn stimulus_ms(&self) -> i64 {
        self.stimulus_offset_ms - self.stimulus_onset_ms
    }

    pub fn is_response(&self) -> bool {
        self.response_key.is_some()
    }

    /// Onset and offset of `phase` within this trial.
    pub fn interval(&self, phase: Phase) -> Option<(i64, i64)> {
        match phase {
            Phase::Fixation => Some((self.fixation_onset_ms, self.fixation_offset_ms)),
            Phase::Stimulus => Some((self.stimulus_onset_ms, self.stimulus_offset_ms)),
            Phase::Probe => Some((self.probe_onset_ms, self.probe_offset_ms)),
            Phase::Break | Phase::Done => None,
        }
    }

    fn check(&self) -> Result<()> {
        let t = [
            self.fixation_onset_ms,
            self.stimulus_onset_ms,
            self.probe_onset_ms,
            self.probe_offset_ms,
        ];
        if t.windows(2).any(|w| w[0] >= w[1])
            || self.fixation_offset_ms != self.stimulus_onset_ms
            || self.stimulus_offset_ms != self.probe_onset_ms
        {
            return Err(GazeError::InvalidArgument(format!(
                "trial {} has out-of-order phase timestamps",
                self.spec.index
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Step {
    pub phase: Phase,
    pub record: Option<TrialRecord>,
    /// Set on the event that starts the mid-session break.
    pub break_started: bool,
}

#[derive(Clone, Debug, PartialEq)]
struct Current {
    fixation_onset: i64,
    stimulus_onset: Option<i64>,
    probe_onset: Option<i64>,
    anticipatory: u32,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DotProbeMachine {
    plan: SessionPlan,
    phase: Phase,
    trial: usize,
    current: Current,
    last_ms: i64,
    completed: usize,
}

impl DotProbeMachine {
    /// Starts trial 0's fixation at `start_ms`.
    pub fn new(plan: SessionPlan, start_ms: i64) -> Result<Self> {
        if plan.trials.is_empty() {
            return Err(GazeError::InvalidArgument("empty session plan".into()));
        }
        Ok(Self {
            plan,
            phase: Phase::Fixation,
            trial: 0,
            current: Current {
                fixation_onset: start_ms,
                stimulus_onset: None,
                probe_onset: None,
                anticipatory: 0,
            },
            last_ms: start_ms,
            completed: 0,
        })
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn trial_index(&self) -> usize {
        self.trial
    }

    pub fn completed(&self) -> usize {
        self.completed
    }

    pub fn plan(&self) -> &SessionPlan {
        &self.plan
    }

    fn begin_trial(&mut self, t: i64) {
        self.phase = Phase::Fixation;
        self.current = Current {
            fixation_onset: t,
            stimulus_onset: None,
            probe_onset: None,
            anticipatory: 0,
        };
    }

    fn finish(&mut self, end: i64, key: Option<String>) -> (TrialRecord, bool) {
        let spec = self.plan.trials[self.trial].clone();
        let stim = self.current.stimulus_onset.expect("stimulus started");
        let probe = self.current.probe_onset.expect("probe started");
        let record = TrialRecord {
            spec,
            fixation_onset_ms: self.current.fixation_onset,
            fixation_offset_ms: stim,
            stimulus_onset_ms: stim,
            stimulus_offset_ms: probe,
            probe_onset_ms: probe,
            probe_offset_ms: end,
            response_time_ms: key.as_ref().map(|_| end - probe),
            response_key: key,
            anticipatory_keys: self.current.anticipatory,
            gaze_counts: PhaseCounts::default(),
        };
        self.completed += 1;
        self.trial += 1;
        let mut break_started = false;
        if self.trial >= self.plan.trials.len() {
            self.phase = Phase::Done;
        } else if self.completed == self.plan.break_after {
            self.phase = Phase::Break;
            break_started = true;
        } else {
            self.begin_trial(end);
        }
        (record, break_started)
    }

    pub fn advance(&mut self, event: &Event) -> Result<Step> {
        let t = event.time();
        if t < self.last_ms {
            return Err(GazeError::InvalidArgument(format!(
                "event at {t} ms precedes the previous one at {} ms",
                self.last_ms
            )));
        }
        self.last_ms = t;
        let mut record = None;
        let mut break_started = false;
        match (self.phase, event) {
            (Phase::Fixation, Event::Tick(_)) => {
                let due = self.current.fixation_onset + self.plan.trials[self.trial].fixation_ms;
                if t >= due {
                    self.current.stimulus_onset = Some(due);
                    self.phase = Phase::Stimulus;
                }
            }
            (Phase::Stimulus, Event::Tick(_)) => {
                let due = self.current.stimulus_onset.expect("stimulus started") + STIMULUS_MS;
                if t >= due {
                    self.current.probe_onset = Some(due);
                    self.phase = Phase::Probe;
                }
            }
            (Phase::Probe, Event::Tick(_)) => {
                let due = self.current.probe_onset.expect("probe started") + PROBE_TIMEOUT_MS;
                if t >= due {
                    let (r, b) = self.finish(due, None);
                    record = Some(r);
                    break_started = b;
                }
            }
            (Phase::Probe, Event::Key { key, .. }) => {
                let onset = self.current.probe_onset.expect("probe started");
                if t > onset {
                    let end = t.min(onset + PROBE_TIMEOUT_MS);
                    let key = (t <= onset + PROBE_TIMEOUT_MS).then(|| key.clone());
                    let (r, b) = self.finish(end, key);
                    record = Some(r);
                    break_started = b;
                } else {
                    self.current.anticipatory += 1;
                }
            }
            (Phase::Fixation | Phase::Stimulus, Event::Key { .. }) => {
                self.current.anticipatory += 1;
            }
            (Phase::Break, Event::Key { .. }) => self.begin_trial(t),
            (Phase::Break | Phase::Done, _) => {}
        }
        Ok(Step {
            phase: self.phase,
            record,
            break_started,
        })
    }
}

/// Drives a machine with ticks every `tick_ms`, pressing `key` `rt_ms(trial)`
/// after each probe onset and resuming from the break after `break_ms`.
/// Returns the completed records and the event stream that produced them.
pub fn run_scripted<F>(
    plan: SessionPlan,
    start_ms: i64,
    tick_ms: i64,
    break_ms: i64,
    mut rt_ms: F,
) -> Result<(Vec<TrialRecord>, Vec<Event>)>
where
    F: FnMut(usize) -> i64,
{
    if tick_ms <= 0 {
        return Err(GazeError::InvalidArgument("tick period must be positive".into()));
    }
    let mut m = DotProbeMachine::new(plan, start_ms)?;
    let mut records = Vec::new();
    let mut events = Vec::new();
    let mut t = start_ms;
    let mut pending_key: Option<i64> = None;
    let mut resume_at: Option<i64> = None;
    let mut last = start_ms;
    while m.phase() != Phase::Done {
        t += tick_ms;
        let event = match (pending_key, resume_at) {
            (Some(k), _) if t >= k => {
                pending_key = None;
                Event::Key { key: "space".into(), t_ms: k.max(last) }
            }
            (_, Some(r)) if t >= r => {
                resume_at = None;
                Event::Key { key: "space".into(), t_ms: r.max(last) }
            }
            _ => Event::Tick(t),
        };
        let before = m.phase();
        let step = m.advance(&event)?;
        last = event.time();
        events.push(event);
        if before != Phase::Probe && step.phase == Phase::Probe {
            let onset = m.current.probe_onset.expect("probe started");
            pending_key = Some(onset + rt_ms(m.trial_index()).max(1));
        }
        if step.break_started {
            resume_at = Some(step.record.as_ref().map_or(t, |r| r.probe_offset_ms) + break_ms);
        }
        if let Some(r) = step.record {
            records.push(r);
        }
    }
    Ok((records, events))
}

pub fn format_trial_log(records: &[TrialRecord]) -> String {
    let mut s = String::new();
    for r in records {
        s.push_str(&serde_json::to_string(r).expect("record serializes"));
        s.push('\n');
    }
    s
}

/// Parses one JSON record per line; blank lines are skipped.
pub fn parse_trial_log(text: &str) -> Result<Vec<TrialRecord>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let line_no = i as u64 + 1;
        let rec: TrialRecord =
            serde_json::from_str(line).map_err(|e| GazeError::parse("trial log", line_no, e.to_string()))?;
        rec.check().map_err(|e| GazeError::parse("trial log", line_no, e.to_string()))?;
        out.push(rec);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::super::tests::catalog;
    use super::super::{build_session, Layout};
    use super::*;
    use crate::geometry::ScreenGeometry;

    fn machine() -> DotProbeMachine {
        let screen = ScreenGeometry::new(1280.0, 800.0).unwrap();
        let mut plan = build_session(&catalog(96), screen, &Layout::default(), 1).unwrap();
        plan.trials[0].fixation_ms = 800;
        DotProbeMachine::new(plan, 0).unwrap()
    }

    fn key(t: i64) -> Event {
        Event::Key { key: "space".into(), t_ms: t }
    }

    #[test]
    fn reaction_time() {
        let mut m = machine();
        assert_eq!(m.advance(&Event::Tick(800)).unwrap().phase, Phase::Stimulus);
        assert_eq!(m.advance(&Event::Tick(2800)).unwrap().phase, Phase::Probe);
        let step = m.advance(&key(3150)).unwrap();
        let r = step.record.unwrap();
        assert_eq!(r.response_time_ms, Some(350));
        assert_eq!((r.fixation_ms(), r.stimulus_ms()), (800, 2000));
        assert_eq!(step.phase, Phase::Fixation);
    }

    #[test]
    fn anticipatory_keys_do_not_advance() {
        let mut m = machine();
        assert_eq!(m.advance(&key(100)).unwrap().phase, Phase::Fixation);
        m.advance(&Event::Tick(800)).unwrap();
        assert_eq!(m.advance(&key(900)).unwrap().phase, Phase::Stimulus);
        m.advance(&Event::Tick(2800)).unwrap();
        let r = m.advance(&key(3000)).unwrap().record.unwrap();
        assert_eq!(r.anticipatory_keys, 2);
    }

    #[test]
    fn one_transition_per_event() {
        let mut m = machine();
        assert_eq!(m.advance(&Event::Tick(10_000)).unwrap().phase, Phase::Stimulus);
        assert_eq!(m.advance(&Event::Tick(10_000)).unwrap().phase, Phase::Probe);
        let s = m.advance(&Event::Tick(10_000)).unwrap();
        let r = s.record.unwrap();
        assert!(r.response_key.is_none());
        assert_eq!(r.probe_offset_ms, 2800 + PROBE_TIMEOUT_MS);
    }

    #[test]
    fn time_cannot_go_back() {
        let mut m = machine();
        m.advance(&Event::Tick(50)).unwrap();
        let before = m.clone();
        assert!(m.advance(&Event::Tick(10)).is_err());
        assert_eq!(m, before);
    }

    #[test]
    fn log_round_trip_and_line_numbers() {
        let mut m = machine();
        m.advance(&Event::Tick(800)).unwrap();
        m.advance(&Event::Tick(2800)).unwrap();
        let r = m.advance(&key(3000)).unwrap().record.unwrap();
        let log = format_trial_log(std::slice::from_ref(&r));
        assert_eq!(parse_trial_log(&log).unwrap(), vec![r]);
        match parse_trial_log(&format!("{log}\n{{oops\n")) {
            Err(GazeError::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
    }
}
