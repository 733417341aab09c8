//! Pointwise error metrics, screen-side agreement, ROI accuracy, inter-frame
//! jitter and the Smooth-L1 β selection harness.

pub mod log;

use serde::{Deserialize, Serialize};

use crate::dotprobe::Phase;
use crate::error::{GazeError, Result};
use crate::geometry::ScreenGeometry;

pub use log::{format_gaze_log, parse_gaze_log, GazeRecord, GAZE_LOG_HEADER};

/// Default pairing tolerance between two trackers' samples.
pub const PAIR_TOLERANCE_MS: i64 = 50;

fn check_pairs(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(GazeError::Shape(format!("{a} predictions vs {b} ground truths")));
    }
    if a == 0 {
        return Err(GazeError::InvalidArgument("empty input".into()));
    }
    Ok(())
}

fn dist2(p: [f32; 2], g: [f32; 2]) -> f64 {
    let dx = p[0] as f64 - g[0] as f64;
    let dy = p[1] as f64 - g[1] as f64;
    dx * dx + dy * dy
}

/// Root of the mean squared L2 distance.
pub fn rmse2d(preds: &[[f32; 2]], gts: &[[f32; 2]]) -> Result<f64> {
    check_pairs(preds.len(), gts.len())?;
    let s: f64 = preds.iter().zip(gts).map(|(p, g)| dist2(*p, *g)).sum();
    Ok((s / preds.len() as f64).sqrt())
}

pub fn mean_l2(preds: &[[f32; 2]], gts: &[[f32; 2]]) -> Result<f64> {
    check_pairs(preds.len(), gts.len())?;
    let s: f64 = preds.iter().zip(gts).map(|(p, g)| dist2(*p, *g).sqrt()).sum();
    Ok(s / preds.len() as f64)
}

/// Mean of per-sample L2 error over that sample's screen diagonal, in percent.
pub fn l2_over_diagonal(preds: &[[f32; 2]], gts: &[[f32; 2]], screens: &[ScreenGeometry]) -> Result<f64> {
    check_pairs(preds.len(), gts.len())?;
    check_pairs(preds.len(), screens.len())?;
    let s: f64 = preds
        .iter()
        .zip(gts)
        .zip(screens)
        .map(|((p, g), sc)| dist2(*p, *g).sqrt() / sc.diagonal())
        .sum();
    Ok(s / preds.len() as f64 * 100.0)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Right,
}

impl Side {
    pub fn opposite(self) -> Side {
        match self {
            Side::Left => Side::Right,
            Side::Right => Side::Left,
        }
    }
}

pub fn screen_side(x_px: f32, screen: &ScreenGeometry) -> Side {
    if (x_px as f64) < screen.width_px as f64 / 2.0 {
        Side::Left
    } else {
        Side::Right
    }
}

/// Which part of the session a sample falls in.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Segment {
    InterTrial,
    Trial { trial: usize, phase: Phase },
}

impl Segment {
    pub fn phase(&self) -> Option<Phase> {
        match self {
            Segment::Trial { phase, .. } => Some(*phase),
            Segment::InterTrial => None,
        }
    }

    pub fn trial(&self) -> Option<usize> {
        match self {
            Segment::Trial { trial, .. } => Some(*trial),
            Segment::InterTrial => None,
        }
    }

    fn is_stimulus(&self) -> bool {
        self.phase() == Some(Phase::Stimulus)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GazeSample {
    pub timestamp_ms: i64,
    pub x: f32,
    pub y: f32,
    pub valid: bool,
}

impl From<&GazeRecord> for GazeSample {
    fn from(r: &GazeRecord) -> Self {
        Self {
            timestamp_ms: r.timestamp_ms,
            x: r.x,
            y: r.y,
            valid: r.valid,
        }
    }
}

/// Timestamped pixel samples with one segment label each.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GazeSeries {
    pub screen: ScreenGeometry,
    pub samples: Vec<GazeSample>,
    pub labels: Vec<Segment>,
}

impl GazeSeries {
    pub fn new(screen: ScreenGeometry, samples: Vec<GazeSample>, labels: Vec<Segment>) -> Result<Self> {
        if samples.len() != labels.len() {
            return Err(GazeError::Shape(format!(
                "{} samples but {} labels",
                samples.len(),
                labels.len()
            )));
        }
        if samples.windows(2).any(|w| w[1].timestamp_ms < w[0].timestamp_ms) {
            return Err(GazeError::InvalidArgument("timestamps must be nondecreasing".into()));
        }
        if samples.iter().any(|s| s.valid && !(s.x.is_finite() && s.y.is_finite())) {
            return Err(GazeError::NonFinite("valid sample with non-finite coordinates".into()));
        }
        Ok(Self { screen, samples, labels })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Same series with every coordinate shifted by `(dx, dy)`.
    pub fn translated(&self, dx: f32, dy: f32) -> Self {
        let mut out = self.clone();
        for s in &mut out.samples {
            s.x += dx;
            s.y += dy;
        }
        out
    }
}

/// Index of the sample in `pool` nearest in time to `t`; earlier index wins ties.
fn nearest(pool: &[(i64, usize)], t: i64) -> Option<usize> {
    if pool.is_empty() {
        return None;
    }
    let pos = pool.partition_point(|(ts, _)| *ts < t);
    let mut best: Option<(i64, usize)> = None;
    for k in [pos.wrapping_sub(1), pos] {
        if let Some((ts, _)) = pool.get(k) {
            let d = (ts - t).abs();
            if best.map_or(true, |(bd, bk)| d < bd || (d == bd && k < bk)) {
                best = Some((d, k));
            }
        }
    }
    // widen left to the first of equal timestamps
    let (_, mut k) = best?;
    while k > 0 && pool[k - 1].0 == pool[k].0 {
        k -= 1;
    }
    Some(k)
}

/// Mutual-nearest pairs of stimulus-phase samples within `tolerance_ms`
/// that share a segment label. Returns index pairs into `a` and `b`.
pub fn pair_samples(a: &GazeSeries, b: &GazeSeries, tolerance_ms: i64) -> Vec<(usize, usize)> {
    let pool = |s: &GazeSeries| -> Vec<(i64, usize)> {
        s.samples
            .iter()
            .zip(&s.labels)
            .enumerate()
            .filter(|(_, (_, l))| l.is_stimulus())
            .map(|(i, (smp, _))| (smp.timestamp_ms, i))
            .collect()
    };
    let (pa, pb) = (pool(a), pool(b));
    let mut out = Vec::new();
    for (ka, &(ta, ia)) in pa.iter().enumerate() {
        let Some(kb) = nearest(&pb, ta) else { continue };
        let (tb, ib) = pb[kb];
        if (ta - tb).abs() > tolerance_ms || a.labels[ia] != b.labels[ib] {
            continue;
        }
        if nearest(&pa, tb) == Some(ka) {
            out.push((ia, ib));
        }
    }
    out
}

/// Fraction of paired, both-valid stimulus samples on the same screen half.
pub fn side_agreement(a: &GazeSeries, b: &GazeSeries, tolerance_ms: i64) -> Result<f64> {
    let mut total = 0usize;
    let mut agree = 0usize;
    for (ia, ib) in pair_samples(a, b, tolerance_ms) {
        let (sa, sb) = (&a.samples[ia], &b.samples[ib]);
        if sa.valid && sb.valid {
            total += 1;
            if screen_side(sa.x, &a.screen) == screen_side(sb.x, &b.screen) {
                agree += 1;
            }
        }
    }
    if total == 0 {
        return Err(GazeError::Undefined("no valid paired stimulus samples".into()));
    }
    Ok(agree as f64 / total as f64)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub x0: f32,
    pub y0: f32,
    pub x1: f32,
    pub y1: f32,
}

impl Rect {
    pub fn new(x0: f32, y0: f32, x1: f32, y1: f32) -> Result<Self> {
        if !(x0 < x1 && y0 < y1) || ![x0, y0, x1, y1].iter().all(|v| v.is_finite()) {
            return Err(GazeError::InvalidArgument(format!("bad rect ({x0}, {y0})-({x1}, {y1})")));
        }
        Ok(Self { x0, y0, x1, y1 })
    }

    pub fn center(&self) -> (f32, f32) {
        ((self.x0 + self.x1) / 2.0, (self.y0 + self.y1) / 2.0)
    }

    /// Moves each edge outward by `margin` times the screen dimension, then clamps.
    pub fn expand(&self, margin: f64, screen: &ScreenGeometry) -> [f64; 4] {
        let (w, h) = (screen.width_px as f64, screen.height_px as f64);
        let (mx, my) = (margin * w, margin * h);
        [
            (self.x0 as f64 - mx).max(0.0),
            (self.y0 as f64 - my).max(0.0),
            (self.x1 as f64 + mx).min(w),
            (self.y1 as f64 + my).min(h),
        ]
    }

    pub fn contains_expanded(&self, x: f32, y: f32, margin: f64, screen: &ScreenGeometry) -> bool {
        let [x0, y0, x1, y1] = self.expand(margin, screen);
        let (x, y) = (x as f64, y as f64);
        x0 <= x && x <= x1 && y0 <= y && y <= y1
    }
}

/// Fraction of valid stimulus-phase samples inside any of their trial's
/// margin-expanded rects. `rois[t]` lists the rects of trial `t`.
pub fn roi_accuracy(series: &GazeSeries, rois: &[Vec<Rect>], margin: f64) -> Result<f64> {
    if !(margin >= 0.0 && margin.is_finite()) {
        return Err(GazeError::InvalidArgument(format!("margin must be >= 0, got {margin}")));
    }
    let mut total = 0usize;
    let mut hits = 0usize;
    for (s, l) in series.samples.iter().zip(&series.labels) {
        let Segment::Trial { trial, phase: Phase::Stimulus } = *l else { continue };
        if !s.valid {
            continue;
        }
        let rects = rois
            .get(trial)
            .ok_or_else(|| GazeError::InvalidArgument(format!("no ROI for trial {trial}")))?;
        total += 1;
        if rects.iter().any(|r| r.contains_expanded(s.x, s.y, margin, &series.screen)) {
            hits += 1;
        }
    }
    if total == 0 {
        return Err(GazeError::Undefined("no valid stimulus samples".into()));
    }
    Ok(hits as f64 / total as f64)
}

/// Mean distance between adjacent samples that are both valid and share a
/// segment label; `only` restricts to one phase.
pub fn jitter(series: &GazeSeries, only: Option<Phase>) -> Result<f64> {
    let mut sum = 0.0;
    let mut n = 0usize;
    for i in 1..series.samples.len() {
        let (a, b) = (&series.samples[i - 1], &series.samples[i]);
        let (la, lb) = (series.labels[i - 1], series.labels[i]);
        if !(a.valid && b.valid) || la != lb {
            continue;
        }
        if only.is_some() && la.phase() != only {
            continue;
        }
        sum += dist2([a.x, a.y], [b.x, b.y]).sqrt();
        n += 1;
    }
    if n == 0 {
        return Err(GazeError::Undefined("no consecutive valid pairs".into()));
    }
    Ok(sum / n as f64)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BetaCurve {
    pub beta: f64,
    pub val_loss: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GridSearchResult {
    pub best_beta: f64,
    pub best_loss: f64,
    pub curves: Vec<BetaCurve>,
    /// Betas dropped because their curve was empty or not finite.
    pub excluded: Vec<f64>,
}

/// Picks the β whose curve reaches the lowest minimum; ties go to the smaller β.
pub fn select_beta(curves: Vec<BetaCurve>) -> Result<GridSearchResult> {
    if curves.is_empty() {
        return Err(GazeError::InvalidArgument("no betas to search".into()));
    }
    let mut best: Option<(f64, f64)> = None;
    let mut excluded = Vec::new();
    for c in &curves {
        if c.val_loss.is_empty() || c.val_loss.iter().any(|v| !v.is_finite()) {
            excluded.push(c.beta);
            continue;
        }
        let m = c.val_loss.iter().copied().fold(f64::INFINITY, f64::min);
        let better = match best {
            None => true,
            Some((bb, bm)) => m < bm || (m == bm && c.beta < bb),
        };
        if better {
            best = Some((c.beta, m));
        }
    }
    let (best_beta, best_loss) =
        best.ok_or_else(|| GazeError::Undefined("every beta produced a non-finite loss curve".into()))?;
    Ok(GridSearchResult {
        best_beta,
        best_loss,
        curves,
        excluded,
    })
}

/// Runs `train_eval` once per β and selects the best.
pub fn beta_grid_search<F>(betas: &[f64], mut train_eval: F) -> Result<GridSearchResult>
where
    F: FnMut(f64) -> Result<Vec<f64>>,
{
    if betas.iter().any(|b| !(*b > 0.0)) {
        return Err(GazeError::InvalidArgument("betas must be positive".into()));
    }
    let mut curves = Vec::with_capacity(betas.len());
    for &beta in betas {
        curves.push(BetaCurve {
            beta,
            val_loss: train_eval(beta)?,
        });
    }
    select_beta(curves)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn screen() -> ScreenGeometry {
        ScreenGeometry::new(1920.0, 1080.0).unwrap()
    }

    #[test]
    fn pointwise_examples() {
        let p = [[3.0, 4.0]];
        let g = [[0.0, 0.0]];
        assert_eq!(mean_l2(&p, &g).unwrap(), 5.0);
        assert_eq!(rmse2d(&p, &g).unwrap(), 5.0);
        let pct = l2_over_diagonal(&p, &g, &[screen()]).unwrap();
        assert!((pct - 0.2269).abs() < 1e-3, "{pct}");
        assert_eq!(rmse2d(&g, &g).unwrap(), 0.0);
        assert!(mean_l2(&[], &[]).is_err());
    }

    #[test]
    fn sides() {
        let s = screen();
        assert_eq!(screen_side(0.0, &s), Side::Left);
        assert_eq!(screen_side(960.0, &s), Side::Right);
        assert_eq!(screen_side(1920.0, &s), Side::Right);
    }

    fn stim_series(xs: &[f32]) -> GazeSeries {
        let samples = xs
            .iter()
            .enumerate()
            .map(|(i, &x)| GazeSample { timestamp_ms: i as i64 * 33, x, y: 500.0, valid: true })
            .collect::<Vec<_>>();
        let labels = vec![Segment::Trial { trial: 0, phase: Phase::Stimulus }; xs.len()];
        GazeSeries::new(screen(), samples, labels).unwrap()
    }

    #[test]
    fn agreement_identity_and_mirror() {
        let a = stim_series(&[100.0, 300.0, 1500.0, 1700.0]);
        let m = stim_series(&[1820.0, 1620.0, 420.0, 220.0]);
        assert_eq!(side_agreement(&a, &a, 50).unwrap(), 1.0);
        assert_eq!(side_agreement(&a, &m, 50).unwrap(), 0.0);
    }

    #[test]
    fn roi_margin_boundary() {
        let s = screen();
        let r = Rect::new(100.0, 100.0, 300.0, 300.0).unwrap();
        let mut series = stim_series(&[301.0]);
        series.samples[0].y = 200.0;
        let rois = vec![vec![r]];
        assert_eq!(roi_accuracy(&series, &rois, 0.0).unwrap(), 0.0);
        assert_eq!(roi_accuracy(&series, &rois, 0.10).unwrap(), 1.0);
        let [x0, ..] = r.expand(0.10, &s);
        assert_eq!(x0, 0.0);
    }

    #[test]
    fn jitter_alternating() {
        let mut series = stim_series(&[0.0, 3.0, 0.0, 3.0]);
        for (i, s) in series.samples.iter_mut().enumerate() {
            s.y = if i % 2 == 0 { 0.0 } else { 4.0 };
        }
        assert_eq!(jitter(&series, None).unwrap(), 5.0);
        assert!(jitter(&stim_series(&[1.0]), None).is_err());
    }

    #[test]
    fn grid_search_rules() {
        let c = |beta, v: Vec<f64>| BetaCurve { beta, val_loss: v };
        let r = select_beta(vec![c(0.1, vec![3.0, 2.0]), c(0.8, vec![2.5, 1.0]), c(1.0, vec![1.5])]).unwrap();
        assert_eq!(r.best_beta, 0.8);
        let r = select_beta(vec![c(0.5, vec![1.0]), c(0.2, vec![1.0])]).unwrap();
        assert_eq!(r.best_beta, 0.2);
        let r = select_beta(vec![c(0.3, vec![f64::NAN]), c(0.9, vec![4.0])]).unwrap();
        assert_eq!((r.best_beta, r.excluded.clone()), (0.9, vec![0.3]));
        assert!(select_beta(vec![c(0.3, vec![f64::INFINITY])]).is_err());
    }
}
