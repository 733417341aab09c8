//! HTTP service around the gaze engine: per-user sessions with private model
//! copies, a calibration endpoint and a per-frame prediction endpoint.
//!
//! ```text
//! POST /session                  {width_px, height_px}      -> {session_id}
//! POST /session/{id}/calibrate   {samples: [...]}           -> calibration report
//! POST /session/{id}/predict     {frame_b64, landmarks, timestamp_ms}
//! GET  /health
//! ```

pub mod api;
pub mod config;
pub mod error;
mod handlers;
pub mod state;

use std::future::Future;
use std::net::SocketAddr;
use std::path::Path;
use std::sync::Arc;
use std::time::{Duration, Instant};

use axum::extract::DefaultBodyLimit;
use axum::routing::{get, post};
use axum::Router;
use gaze_core::model::{load_weights_file, ModelConfig, WeightContainer};
use gaze_core::pipeline::Engine;
use gaze_core::preprocess::MeanImages;
use gaze_core::GazeError;

pub use config::ServerConfig;
pub use error::{ApiError, ConfigError};
pub use state::AppState;

pub fn router(state: Arc<AppState>) -> Router {
    let limit = state.config.max_body_bytes;
    Router::new()
        .route("/health", get(handlers::health))
        .route("/session", post(handlers::create_session))
        .route("/session/{id}/calibrate", post(handlers::calibrate))
        .route("/session/{id}/predict", post(handlers::predict))
        .layer(DefaultBodyLimit::max(limit))
        .with_state(state)
}

fn read_means(path: &Path, config: &ModelConfig) -> Result<MeanImages, GazeError> {
    let bytes = std::fs::read(path).map_err(|e| GazeError::io(path, e))?;
    MeanImages::from_container(&WeightContainer::decode(&bytes)?, config)
}

/// Loads the base weights (and means) named by the config.
pub fn load_engine(config: &ServerConfig) -> Result<Engine, ConfigError> {
    let path = config
        .weights
        .as_ref()
        .ok_or_else(|| ConfigError::Invalid("no weights path configured".into()))?;
    let model = load_weights_file(path)?;
    if let Some(p) = config.profile {
        if model.config().profile != p {
            return Err(ConfigError::Invalid(format!(
                "weights are {} profile but {p} was requested",
                model.config().profile
            )));
        }
    }
    let means = match &config.means {
        Some(p) => read_means(p, model.config())?,
        None => MeanImages::uniform(model.config(), 0.5),
    };
    Ok(Engine::new(model, means)?)
}

/// Serves until `shutdown` resolves. Calls `on_bind` with the bound address.
pub async fn serve<F>(config: ServerConfig, on_bind: impl FnOnce(SocketAddr), shutdown: F) -> Result<(), ConfigError>
where
    F: Future<Output = ()> + Send + 'static,
{
    let engine = load_engine(&config)?;
    let addr = format!("{}:{}", config.host, config.port);
    let listener = tokio::net::TcpListener::bind(&addr)
        .await
        .map_err(|e| ConfigError::Invalid(format!("cannot bind {addr}: {e}")))?;
    let local = listener
        .local_addr()
        .map_err(|e| ConfigError::Invalid(e.to_string()))?;
    let state = Arc::new(AppState::new(engine, config));
    let sweeper = {
        let state = Arc::clone(&state);
        tokio::spawn(async move {
            let mut tick = tokio::time::interval(Duration::from_secs(60));
            loop {
                tick.tick().await;
                let n = state.sweep(Instant::now());
                if n > 0 {
                    tracing::info!(expired = n, "expired idle sessions");
                }
            }
        })
    };
    tracing::info!(%local, "listening");
    on_bind(local);
    let result = axum::serve(listener, router(state))
        .with_graceful_shutdown(shutdown)
        .await
        .map_err(|e| ConfigError::Invalid(format!("server error: {e}")));
    sweeper.abort();
    result
}
