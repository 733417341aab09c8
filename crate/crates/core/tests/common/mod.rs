//! Brute-force loop oracles for the series metrics.
#![allow(dead_code)]

use gaze_core::dotprobe::Phase;
use gaze_core::metrics::{GazeSeries, Rect, Segment};

pub fn pairs_oracle(a: &GazeSeries, b: &GazeSeries, tol: i64) -> Vec<(usize, usize)> {
    let stim_idx = |s: &GazeSeries| -> Vec<usize> {
        (0..s.len()).filter(|&i| s.labels[i].phase() == Some(Phase::Stimulus)).collect()
    };
    let (ia, ib) = (stim_idx(a), stim_idx(b));
    let nearest = |pool: &[usize], s: &GazeSeries, t: i64| -> Option<usize> {
        let mut best: Option<(i64, usize)> = None;
        for &i in pool {
            let d = (s.samples[i].timestamp_ms - t).abs();
            if best.map_or(true, |(bd, _)| d < bd) {
                best = Some((d, i));
            }
        }
        best.map(|(_, i)| i)
    };
    let mut out = Vec::new();
    for &i in &ia {
        let ta = a.samples[i].timestamp_ms;
        let Some(j) = nearest(&ib, b, ta) else { continue };
        let tb = b.samples[j].timestamp_ms;
        if (ta - tb).abs() <= tol && a.labels[i] == b.labels[j] && nearest(&ia, a, tb) == Some(i) {
            out.push((i, j));
        }
    }
    out
}

pub fn agreement_oracle(a: &GazeSeries, b: &GazeSeries, tol: i64) -> f64 {
    let (mut n, mut k) = (0, 0);
    for (i, j) in pairs_oracle(a, b, tol) {
        if a.samples[i].valid && b.samples[j].valid {
            n += 1;
            let w = a.screen.width_px as f64 / 2.0;
            if ((a.samples[i].x as f64) < w) == ((b.samples[j].x as f64) < w) {
                k += 1;
            }
        }
    }
    k as f64 / n as f64
}

pub fn roi_oracle(s: &GazeSeries, rois: &[Vec<Rect>], m: f64) -> f64 {
    let (w, h) = (s.screen.width_px as f64, s.screen.height_px as f64);
    let (mut n, mut k) = (0, 0);
    for i in 0..s.len() {
        let Segment::Trial { trial, phase: Phase::Stimulus } = s.labels[i] else { continue };
        let p = s.samples[i];
        if !p.valid {
            continue;
        }
        n += 1;
        let hit = rois[trial].iter().any(|r| {
            let x0 = (r.x0 as f64 - m * w).max(0.0);
            let x1 = (r.x1 as f64 + m * w).min(w);
            let y0 = (r.y0 as f64 - m * h).max(0.0);
            let y1 = (r.y1 as f64 + m * h).min(h);
            (x0..=x1).contains(&(p.x as f64)) && (y0..=y1).contains(&(p.y as f64))
        });
        if hit {
            k += 1;
        }
    }
    k as f64 / n as f64
}

pub fn jitter_oracle(s: &GazeSeries, only: Option<Phase>) -> f64 {
    let (mut sum, mut n) = (0.0, 0);
    for i in 1..s.len() {
        let (a, b) = (s.samples[i - 1], s.samples[i]);
        if !a.valid || !b.valid || s.labels[i] != s.labels[i - 1] {
            continue;
        }
        if only.is_some() && s.labels[i].phase() != only {
            continue;
        }
        sum += ((a.x as f64 - b.x as f64).powi(2) + (a.y as f64 - b.y as f64).powi(2)).sqrt();
        n += 1;
    }
    sum / n as f64
}
