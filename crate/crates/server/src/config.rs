//! Server configuration: a TOML file plus `EYETHEIA_*` environment overrides.

use std::path::{Path, PathBuf};
use std::time::Duration;

use gaze_core::calibration::FineTuneConfig;
use gaze_core::model::Profile;
use gaze_core::smoothing::OneEuroConfig;
use serde::{Deserialize, Serialize};

use crate::error::ConfigError;

pub const ENV_WEIGHTS: &str = "EYETHEIA_WEIGHTS";
pub const ENV_PORT: &str = "EYETHEIA_PORT";
pub const ENV_PROFILE: &str = "EYETHEIA_PROFILE";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServerConfig {
    /// Weight container with an embedded model config.
    pub weights: Option<PathBuf>,
    /// Mean-image container; uniform 0.5 when absent.
    pub means: Option<PathBuf>,
    /// Expected profile of the weights, checked at startup.
    pub profile: Option<Profile>,
    pub host: String,
    pub port: u16,
    pub session_ttl_secs: u64,
    pub calibration_timeout_secs: u64,
    pub max_body_bytes: usize,
    pub oneeuro: OneEuroConfig,
    pub calibration: FineTuneConfig,
}

impl Default for ServerConfig {
    fn default() -> Self {
        Self {
            weights: None,
            means: None,
            profile: None,
            host: "127.0.0.1".into(),
            port: 8080,
            session_ttl_secs: 30 * 60,
            calibration_timeout_secs: 120,
            max_body_bytes: 64 * 1024 * 1024,
            oneeuro: OneEuroConfig::default(),
            calibration: FineTuneConfig::default(),
        }
    }
}

impl ServerConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let cfg: Self = toml::from_str(text).map_err(|e| ConfigError::Invalid(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Invalid(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    /// Applies `EYETHEIA_WEIGHTS`, `EYETHEIA_PORT` and `EYETHEIA_PROFILE`
    /// as returned by `lookup`.
    pub fn with_env<F>(mut self, lookup: F) -> Result<Self, ConfigError>
    where
        F: Fn(&str) -> Option<String>,
    {
        if let Some(w) = lookup(ENV_WEIGHTS) {
            self.weights = Some(PathBuf::from(w));
        }
        if let Some(p) = lookup(ENV_PORT) {
            self.port = p
                .trim()
                .parse()
                .map_err(|_| ConfigError::Invalid(format!("{ENV_PORT}={p:?} is not a port")))?;
        }
        if let Some(p) = lookup(ENV_PROFILE) {
            self.profile = Some(p.parse().map_err(|e| ConfigError::Invalid(format!("{ENV_PROFILE}: {e}")))?);
        }
        self.validate()?;
        Ok(self)
    }

    pub fn with_process_env(self) -> Result<Self, ConfigError> {
        self.with_env(|k| std::env::var(k).ok())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.oneeuro.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        if !(self.calibration.lr >= 0.0 && self.calibration.lr.is_finite()) || self.calibration.epochs == 0 {
            return Err(ConfigError::Invalid("calibration needs lr >= 0 and epochs > 0".into()));
        }
        if self.session_ttl_secs == 0 || self.calibration_timeout_secs == 0 {
            return Err(ConfigError::Invalid("timeouts must be positive".into()));
        }
        Ok(())
    }

    pub fn session_ttl(&self) -> Duration {
        Duration::from_secs(self.session_ttl_secs)
    }

    pub fn calibration_timeout(&self) -> Duration {
        Duration::from_secs(self.calibration_timeout_secs)
    }
}
