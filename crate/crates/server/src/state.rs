//! Shared base engine and the per-session table.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, MutexGuard};
use std::time::{Duration, Instant};

use gaze_core::calibration::FineTuneConfig;
use gaze_core::geometry::ScreenGeometry;
use gaze_core::pipeline::Engine;
use gaze_core::smoothing::OneEuroState;

use crate::config::ServerConfig;
use crate::error::ApiError;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    Ready,
    Calibrating,
}

pub struct Session {
    pub screen: ScreenGeometry,
    /// Private copy of the base weights.
    pub engine: Engine,
    pub filter: OneEuroState,
    pub fine_tune: FineTuneConfig,
    pub status: Status,
    /// Bumped whenever a calibration starts or is abandoned; a finishing
    /// calibration only installs its weights if the generation still matches.
    pub generation: u64,
    pub last_used: Instant,
}

pub type SessionSlot = Arc<Mutex<Session>>;

pub struct AppState {
    pub base: Arc<Engine>,
    pub config: ServerConfig,
    pub started: Instant,
    sessions: Mutex<HashMap<String, SessionSlot>>,
}

pub(crate) fn lock<T>(m: &Mutex<T>) -> MutexGuard<'_, T> {
    m.lock().unwrap_or_else(|p| p.into_inner())
}

impl AppState {
    pub fn new(base: Engine, config: ServerConfig) -> Self {
        Self {
            base: Arc::new(base),
            config,
            started: Instant::now(),
            sessions: Mutex::new(HashMap::new()),
        }
    }

    pub fn insert(&self, id: String, session: Session) {
        lock(&self.sessions).insert(id, Arc::new(Mutex::new(session)));
    }

    pub fn get(&self, id: &str) -> Result<SessionSlot, ApiError> {
        self.sweep(Instant::now());
        let slot = lock(&self.sessions).get(id).cloned().ok_or_else(|| ApiError::not_found(id))?;
        lock(&slot).last_used = Instant::now();
        Ok(slot)
    }

    pub fn len(&self) -> usize {
        lock(&self.sessions).len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Drops sessions idle for longer than the TTL. Calibrating sessions stay.
    pub fn sweep(&self, now: Instant) -> usize {
        let ttl = self.config.session_ttl();
        let mut map = lock(&self.sessions);
        let before = map.len();
        map.retain(|_, slot| match slot.try_lock() {
            Ok(s) => s.status == Status::Calibrating || idle(now, s.last_used) <= ttl,
            Err(_) => true,
        });
        before - map.len()
    }
}

fn idle(now: Instant, last: Instant) -> Duration {
    now.saturating_duration_since(last)
}
