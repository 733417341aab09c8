use std::f64::consts::PI;

use gaze_core::geometry::{GazePoint, Space};
use gaze_core::smoothing::{OneEuroConfig, OneEuroState};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn px(x: f32, y: f32) -> GazePoint {
    GazePoint::new(x, y, Space::ScreenPx)
}

fn filter() -> OneEuroState {
    OneEuroState::new(OneEuroConfig::default()).unwrap()
}

fn variance(v: &[f64]) -> f64 {
    let m = v.iter().sum::<f64>() / v.len() as f64;
    v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64
}

/// Per-axis reference update written out from the filter's definition.
struct Reference {
    x: f64,
    dx: f64,
    t: f64,
}

impl Reference {
    fn step(&mut self, t: f64, x: f64, cfg: &OneEuroConfig) -> f64 {
        let te = t - self.t;
        let a = |fc: f64| 1.0 / (1.0 + 1.0 / (2.0 * PI * fc) / te);
        let raw = (x - self.x) / te;
        self.dx = a(cfg.d_cutoff) * raw + (1.0 - a(cfg.d_cutoff)) * self.dx;
        let fc = cfg.min_cutoff + cfg.beta * self.dx.abs();
        self.x = a(fc) * x + (1.0 - a(fc)) * self.x;
        self.t = t;
        self.x
    }
}

#[test]
fn constants_pass_through() {
    let mut f = filter();
    for i in 0..40 {
        let out = f.filter(i * 33, &px(812.25, 301.5)).unwrap();
        if i >= 20 {
            assert!((out.x - 812.25).abs() < 1e-6 && (out.y - 301.5).abs() < 1e-6);
        }
    }
}

#[test]
fn matches_reference_update() {
    let cfg = OneEuroConfig {
        beta: 0.05,
        ..OneEuroConfig::default()
    };
    let mut f = OneEuroState::new(cfg).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut t = 0i64;
    let x0 = 500.0f32;
    f.filter(t, &px(x0, 0.0)).unwrap();
    let mut r = Reference { x: x0 as f64, dx: 0.0, t: 0.0 };
    for _ in 0..200 {
        t += rng.gen_range(10..60);
        let x = rng.gen_range(0.0..1000.0f32);
        let got = f.filter(t, &px(x, 0.0)).unwrap().x as f64;
        let want = r.step(t as f64 / 1000.0, x as f64, &cfg);
        assert!((got - want).abs() < 1e-3, "{got} vs {want}");
    }
}

#[test]
fn variance_drops_on_stationary_noise() {
    for seed in 0..20 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut f = filter();
        let (mut raw, mut out) = (Vec::new(), Vec::new());
        for i in 0..300 {
            let x = 960.0 + rng.gen_range(-80.0..80.0f32);
            let y = 540.0 + rng.gen_range(-80.0..80.0f32);
            let p = f.filter(i * 33, &px(x, y)).unwrap();
            raw.push(x as f64);
            out.push(p.x as f64);
        }
        assert!(variance(&out) < variance(&raw), "seed {seed}");
    }
}

#[test]
fn noisy_sine_tracks_clean_signal_better() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut f = filter();
    let (mut e_in, mut e_out) = (0.0, 0.0);
    for i in 0..300i64 {
        let t = i as f64 / 30.0;
        let clean = 960.0 + 300.0 * (2.0 * PI * 0.2 * t).sin();
        let noisy = clean + rng.gen_range(-60.0..60.0);
        let out = f.filter(i * 1000 / 30, &px(noisy as f32, 540.0)).unwrap();
        e_in += (noisy - clean).powi(2);
        e_out += (out.x as f64 - clean).powi(2);
    }
    assert!(e_out < e_in, "{} vs {}", e_out / 300.0, e_in / 300.0);
}

#[test]
fn step_is_approached_monotonically_without_beta() {
    let cfg = OneEuroConfig {
        beta: 0.0,
        ..OneEuroConfig::default()
    };
    let mut f = OneEuroState::new(cfg).unwrap();
    f.filter(0, &px(0.0, 0.0)).unwrap();
    let mut prev = 0.0;
    for i in 1..200 {
        let x = f.filter(i * 33, &px(100.0, 0.0)).unwrap().x;
        assert!(x >= prev && x <= 100.0);
        prev = x;
    }
    assert!(prev > 99.0);
}

#[test]
fn rejection_leaves_state_unchanged() {
    let mut f = filter();
    f.filter(1000, &px(1.0, 2.0)).unwrap();
    f.filter(1033, &px(3.0, 4.0)).unwrap();
    let before = f.clone();
    assert!(f.filter(1033, &px(50.0, 50.0)).is_err());
    assert!(f.filter(10, &px(50.0, 50.0)).is_err());
    assert!(f.filter(2000, &px(f32::NAN, 0.0)).is_err());
    assert_eq!(f, before);
    assert_eq!(f.last_timestamp(), Some(1033));
}

#[test]
fn output_keeps_space_and_disabled_passes_raw() {
    let mut f = OneEuroState::new(OneEuroConfig {
        enabled: false,
        ..OneEuroConfig::default()
    })
    .unwrap();
    for (i, x) in [5.0, 500.0, 50.0].into_iter().enumerate() {
        let out = f.filter(i as i64 * 10, &px(x, 1.0)).unwrap();
        assert_eq!((out.x, out.space), (x, Space::ScreenPx));
    }
    assert!(OneEuroState::new(OneEuroConfig { min_cutoff: 0.0, ..OneEuroConfig::default() }).is_err());
    assert!(OneEuroState::new(OneEuroConfig { beta: -1.0, ..OneEuroConfig::default() }).is_err());
}

proptest! {
    #[test]
    fn stays_in_hull_without_beta(xs in prop::collection::vec((-1e3f32..1e3, 1i64..100), 1..100)) {
        let cfg = OneEuroConfig { beta: 0.0, ..OneEuroConfig::default() };
        let mut f = OneEuroState::new(cfg).unwrap();
        let (mut lo, mut hi) = (f32::INFINITY, f32::NEG_INFINITY);
        let mut t = 0;
        for (x, dt) in xs {
            t += dt;
            lo = lo.min(x);
            hi = hi.max(x);
            let out = f.filter(t, &px(x, -x)).unwrap();
            prop_assert!(out.x >= lo - 1e-3 && out.x <= hi + 1e-3);
            prop_assert!(out.y >= -hi - 1e-3 && out.y <= -lo + 1e-3);
        }
    }

    #[test]
    fn first_sample_unchanged(x in -1e4f32..1e4, y in -1e4f32..1e4, t in any::<i64>()) {
        let out = filter().filter(t, &px(x, y)).unwrap();
        prop_assert_eq!((out.x, out.y), (x, y));
    }
}
