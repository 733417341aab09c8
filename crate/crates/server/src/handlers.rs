use std::sync::Arc;
use std::time::Instant;

use axum::extract::{FromRequest, Path, Request, State};
use axum::http::StatusCode;
use axum::Json;
use gaze_core::calibration::{assemble, fine_tune, CalibrationInput};
use gaze_core::geometry::ScreenGeometry;
use gaze_core::preprocess::wire::decode_frame;
use gaze_core::smoothing::OneEuroState;
use serde::de::DeserializeOwned;
use uuid::Uuid;

use crate::api::*;
use crate::error::ApiError;
use crate::state::{lock, AppState, Session, Status};

type Shared = State<Arc<AppState>>;

/// `Json` whose rejections are reported in the API error shape.
pub struct Body<T>(pub T);

impl<S: Send + Sync, T: DeserializeOwned> FromRequest<S> for Body<T> {
    type Rejection = ApiError;

    async fn from_request(req: Request, state: &S) -> Result<Self, ApiError> {
        match Json::<T>::from_request(req, state).await {
            Ok(Json(v)) => Ok(Body(v)),
            Err(e) => Err(ApiError::new(e.status(), "bad_request", e.body_text())),
        }
    }
}

pub async fn health(State(state): Shared) -> Json<HealthResponse> {
    let config = state.base.model.config();
    Json(HealthResponse {
        schema_version: SCHEMA_VERSION,
        status: "ok".into(),
        profile: config.profile.to_string(),
        output_space: config.output_space.name().into(),
        fingerprint: config.fingerprint(),
        uptime_s: state.started.elapsed().as_secs_f64(),
        sessions: state.len(),
    })
}

pub async fn create_session(
    State(state): Shared,
    Body(req): Body<CreateSessionRequest>,
) -> Result<(StatusCode, Json<CreateSessionResponse>), ApiError> {
    let screen = ScreenGeometry::new(req.width_px, req.height_px)?;
    let filter = OneEuroState::new(req.oneeuro.unwrap_or(state.config.oneeuro))?;
    let fine_tune = req.calibration.unwrap_or(state.config.calibration);
    if !(fine_tune.lr >= 0.0 && fine_tune.lr.is_finite()) || fine_tune.epochs == 0 {
        return Err(ApiError::new(StatusCode::BAD_REQUEST, "invalid_argument", "calibration needs lr >= 0 and epochs > 0"));
    }
    state.sweep(Instant::now());
    let id = Uuid::new_v4().simple().to_string();
    state.insert(
        id.clone(),
        Session {
            screen,
            engine: (*state.base).clone(),
            filter,
            fine_tune,
            status: Status::Ready,
            generation: 0,
            last_used: Instant::now(),
        },
    );
    Ok((
        StatusCode::CREATED,
        Json(CreateSessionResponse {
            schema_version: SCHEMA_VERSION,
            session_id: id,
        }),
    ))
}

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> Result<T, ApiError> + Send + 'static) -> Result<T, ApiError> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::internal(format!("worker failed: {e}")))?
}

pub async fn calibrate(
    State(state): Shared,
    Path(id): Path<String>,
    Body(req): Body<CalibrateRequest>,
) -> Result<Json<CalibrateResponse>, ApiError> {
    let slot = state.get(&id)?;
    let (mut engine, screen, cfg, generation) = {
        let mut s = lock(&slot);
        if s.status == Status::Calibrating {
            return Err(ApiError::calibrating());
        }
        s.status = Status::Calibrating;
        s.generation += 1;
        (s.engine.clone(), s.screen, s.fine_tune, s.generation)
    };

    let work = blocking(move || {
        let inputs = req
            .samples
            .iter()
            .map(|s| {
                Ok(CalibrationInput {
                    frame: decode_frame(&s.frame_b64, s.landmarks.as_deref())?,
                    target_px: s.target_px,
                })
            })
            .collect::<Result<Vec<_>, gaze_core::GazeError>>()?;
        let config = engine.model.config().clone();
        let assembled = assemble(&inputs, &screen, config.output_space, &engine.means, &config, &engine.landmarks)?;
        let report = fine_tune(&mut engine.model, &assembled, &screen, &cfg)?;
        Ok((engine, report))
    });
    let outcome = tokio::time::timeout(state.config.calibration_timeout(), work).await;

    let mut s = lock(&slot);
    if s.generation != generation {
        return Err(ApiError::internal("calibration was superseded"));
    }
    s.status = Status::Ready;
    match outcome {
        Err(_) => {
            s.generation += 1;
            Err(ApiError::new(StatusCode::GATEWAY_TIMEOUT, "calibration_timeout", "calibration took too long"))
        }
        Ok(Err(e)) => Err(e),
        Ok(Ok((engine, report))) => {
            s.engine = engine;
            s.filter.reset();
            tracing::info!(session = %id, before = report.mean_error_px_before, after = report.mean_error_px_after, "calibrated");
            Ok(Json(CalibrateResponse {
                schema_version: SCHEMA_VERSION,
                report,
            }))
        }
    }
}

pub async fn predict(
    State(state): Shared,
    Path(id): Path<String>,
    Body(req): Body<PredictRequest>,
) -> Result<Json<PredictResponse>, ApiError> {
    let slot = state.get(&id)?;
    if lock(&slot).status == Status::Calibrating {
        return Err(ApiError::calibrating());
    }
    blocking(move || {
        let frame = decode_frame(&req.frame_b64, req.landmarks.as_deref())?;
        let mut s = lock(&slot);
        if s.status == Status::Calibrating {
            return Err(ApiError::calibrating());
        }
        if let Some(last) = s.filter.last_timestamp() {
            if req.timestamp_ms <= last {
                return Err(ApiError::new(
                    StatusCode::BAD_REQUEST,
                    "stale_timestamp",
                    format!("timestamp {} ms is not after {last} ms", req.timestamp_ms),
                ));
            }
        }
        let Some(p) = s.engine.predict_frame(&frame, &s.screen)? else {
            return Ok(PredictResponse {
                schema_version: SCHEMA_VERSION,
                timestamp_ms: req.timestamp_ms,
                valid: false,
                face_detected: false,
                raw: None,
                smoothed: None,
                space_chain: None,
            });
        };
        let smoothed = s.filter.filter(req.timestamp_ms, &p.screen_px)?;
        let raw = PointPx {
            x_px: p.screen_px.x,
            y_px: p.screen_px.y,
        };
        Ok(PredictResponse {
            schema_version: SCHEMA_VERSION,
            timestamp_ms: req.timestamp_ms,
            valid: true,
            face_detected: true,
            raw: Some(raw),
            smoothed: Some(PointPx {
                x_px: smoothed.x,
                y_px: smoothed.y,
            }),
            space_chain: Some(SpaceChain {
                model_space: p.model_space.space.name().into(),
                model_x: p.model_space.x,
                model_y: p.model_space.y,
                screen_px: raw,
            }),
        })
    })
    .await
    .map(Json)
}
