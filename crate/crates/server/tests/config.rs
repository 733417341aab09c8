use std::collections::HashMap;
use std::path::PathBuf;

use gaze_core::geometry::Space;
use gaze_core::model::{save_weights, GazeNet, ModelConfig, Profile};
use gaze_server::{load_engine, ConfigError, ServerConfig};

fn env(pairs: &[(&str, &str)]) -> impl Fn(&str) -> Option<String> {
    let map: HashMap<String, String> = pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect();
    move |k| map.get(k).cloned()
}

#[test]
fn defaults() {
    let c = ServerConfig::default();
    assert_eq!(c.session_ttl_secs, 1800);
    assert_eq!(c.calibration_timeout_secs, 120);
    assert_eq!(c.calibration.lr, 1e-4);
    assert_eq!(c.calibration.epochs, 100);
    assert_eq!((c.oneeuro.min_cutoff, c.oneeuro.beta, c.oneeuro.d_cutoff), (1.0, 0.007, 1.0));
}

#[test]
fn toml_file_with_oneeuro_section() {
    let c = ServerConfig::from_toml(
        r#"
        weights = "w.eyth"
        port = 9000
        profile = "tiny"

        [oneeuro]
        min_cutoff = 0.5
        beta = 0.01
        enabled = false
        "#,
    )
    .unwrap();
    assert_eq!(c.weights, Some(PathBuf::from("w.eyth")));
    assert_eq!(c.port, 9000);
    assert_eq!(c.profile, Some(Profile::Tiny));
    assert_eq!((c.oneeuro.min_cutoff, c.oneeuro.beta, c.oneeuro.d_cutoff), (0.5, 0.01, 1.0));
    assert!(!c.oneeuro.enabled);
}

#[test]
fn invalid_files_are_rejected() {
    assert!(ServerConfig::from_toml("prot = 1").is_err());
    assert!(ServerConfig::from_toml("[oneeuro]\nmin_cutoff = 0").is_err());
    assert!(ServerConfig::from_toml("session_ttl_secs = 0").is_err());
}

#[test]
fn environment_overrides_file() {
    let c = ServerConfig::from_toml("port = 9000\nweights = \"a\"").unwrap();
    let c = c
        .with_env(env(&[("EYETHEIA_WEIGHTS", "b.eyth"), ("EYETHEIA_PORT", "7001"), ("EYETHEIA_PROFILE", "full")]))
        .unwrap();
    assert_eq!(c.weights, Some(PathBuf::from("b.eyth")));
    assert_eq!(c.port, 7001);
    assert_eq!(c.profile, Some(Profile::Full));
    assert!(ServerConfig::default().with_env(env(&[("EYETHEIA_PORT", "http")])).is_err());
    assert!(ServerConfig::default().with_env(env(&[("EYETHEIA_PROFILE", "huge")])).is_err());
}

#[test]
fn engine_loading_checks_path_and_profile() {
    let dir = tempfile::tempdir().unwrap();
    let missing = ServerConfig {
        weights: Some(dir.path().join("missing.eyth")),
        ..ServerConfig::default()
    };
    assert!(matches!(load_engine(&missing), Err(ConfigError::Model(_))));
    assert!(load_engine(&ServerConfig::default()).is_err());

    let path = dir.path().join("tiny.eyth");
    let model = GazeNet::build(ModelConfig::tiny(Space::CameraCm), 0).unwrap();
    std::fs::write(&path, save_weights(&model).unwrap()).unwrap();
    let ok = ServerConfig {
        weights: Some(path.clone()),
        profile: Some(Profile::Tiny),
        ..ServerConfig::default()
    };
    let engine = load_engine(&ok).unwrap();
    assert_eq!(engine.model.config().output_space, Space::CameraCm);
    let wrong = ServerConfig {
        profile: Some(Profile::Full),
        ..ok
    };
    assert!(matches!(load_engine(&wrong), Err(ConfigError::Invalid(_))));
}
