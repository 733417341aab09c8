use gaze_core::geometry::{cm_to_px, from_px, norm_to_px, px_to_cm, px_to_norm, to_px, GazePoint, ScreenGeometry, Space};
use gaze_core::GazeError;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn hd() -> ScreenGeometry {
    ScreenGeometry::new(1920.0, 1080.0).unwrap()
}

fn xy(p: GazePoint) -> (f32, f32) {
    (p.x, p.y)
}

#[test]
fn fixed_points_map_exactly() {
    let s = hd();
    let cm = |x, y| GazePoint::new(x, y, Space::CameraCm);
    assert_eq!(xy(cm_to_px(&cm(0.0, 0.0), &s).unwrap()), (960.0, 540.0));
    assert_eq!(xy(cm_to_px(&cm(-25.0, 25.0), &s).unwrap()), (0.0, 0.0));
    assert_eq!(xy(cm_to_px(&cm(25.0, -25.0), &s).unwrap()), (1920.0, 1080.0));
    let n = GazePoint::new(0.5, 0.5, Space::NormalizedScreen);
    assert_eq!(xy(norm_to_px(&n, &s).unwrap()), (960.0, 540.0));
    assert_eq!(to_px(&n, &s).unwrap().space, Space::ScreenPx);
}

#[test]
fn out_of_range_points_are_clamped() {
    let s = hd();
    let p = cm_to_px(&GazePoint::new(40.0, -40.0, Space::CameraCm), &s).unwrap();
    assert_eq!(xy(p), (1920.0, 1080.0));
    let p = px_to_norm(&GazePoint::new(-10.0, 5000.0, Space::ScreenPx), &s).unwrap();
    assert_eq!(xy(p), (0.0, 1.0));
}

#[test]
fn round_trips_within_tolerance() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..1000 {
        let s = ScreenGeometry::new(rng.gen_range(320.0..4000.0), rng.gen_range(240.0..3000.0)).unwrap();
        let c = GazePoint::new(rng.gen_range(-25.0..25.0), rng.gen_range(-25.0..25.0), Space::CameraCm);
        let back = px_to_cm(&cm_to_px(&c, &s).unwrap(), &s).unwrap();
        assert!((back.x - c.x).abs() < 1e-5 * 25.0 && (back.y - c.y).abs() < 1e-5 * 25.0);
        let n = GazePoint::new(rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0), Space::NormalizedScreen);
        let back = px_to_norm(&norm_to_px(&n, &s).unwrap(), &s).unwrap();
        assert!((back.x - n.x).abs() < 1e-5 && (back.y - n.y).abs() < 1e-5);
        let back = from_px(&to_px(&n, &s).unwrap(), Space::NormalizedScreen, &s).unwrap();
        assert!((back.x - n.x).abs() < 1e-5);
    }
}

#[test]
fn wrong_space_is_rejected() {
    let s = hd();
    let p = GazePoint::new(1.0, 1.0, Space::ScreenPx);
    assert!(matches!(cm_to_px(&p, &s), Err(GazeError::WrongSpace { .. })));
    assert!(norm_to_px(&p, &s).is_err());
    assert!(px_to_cm(&GazePoint::new(0.0, 0.0, Space::CameraCm), &s).is_err());
    assert!(ScreenGeometry::new(0.0, 100.0).is_err());
}

proptest! {
    #[test]
    fn cm_to_px_is_monotone(a in -25.0f32..25.0, b in -25.0f32..25.0, y in -25.0f32..25.0) {
        let s = hd();
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let p = |x| cm_to_px(&GazePoint::new(x, y, Space::CameraCm), &s).unwrap();
        prop_assert!(p(lo).x <= p(hi).x);
        let q = |v| cm_to_px(&GazePoint::new(y, v, Space::CameraCm), &s).unwrap();
        // Screen y grows downwards.
        prop_assert!(q(lo).y >= q(hi).y);
    }

    #[test]
    fn conversions_tag_and_preserve_metadata(x in -1e4f32..1e4, y in -1e4f32..1e4, t in any::<i64>()) {
        let s = hd();
        let p = GazePoint::new(x, y, Space::ScreenPx).at(t);
        for space in [Space::CameraCm, Space::NormalizedScreen, Space::ScreenPx] {
            let q = from_px(&p, space, &s).unwrap();
            prop_assert_eq!(q.space, space);
            prop_assert_eq!(q.timestamp_ms, Some(t));
            let back = to_px(&q, &s).unwrap();
            prop_assert!((0.0..=1920.0).contains(&back.x) && (0.0..=1080.0).contains(&back.y));
        }
    }
}
