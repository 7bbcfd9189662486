//! HTTP front end for classroom sessions. Every route lives under `/v1`;
//! bodies are JSON except frame uploads, which are raw PNG.

mod error;
mod frames;
mod handlers;

use std::path::PathBuf;
use std::sync::{Arc, Mutex, MutexGuard};

use axum::extract::DefaultBodyLimit;
use axum::routing::{get, post};
use axum::Router;
use ethica_ar_core::classroom::Classroom;
use ethica_ar_core::vision::{DetectionParams, MarkerSpec};
use tokio::net::TcpListener;
use tower_http::cors::CorsLayer;
use tower_http::services::ServeDir;

pub use error::ApiError;
pub use frames::{resolve, FrameResult, FrameStatus, Resolution};
pub use handlers::{QuestionView, SessionView};

pub const ADDR_ENV: &str = "ETHICA_AR_ADDR";
pub const DEFAULT_ADDR: &str = "127.0.0.1:8080";

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    pub spec: MarkerSpec,
    pub params: DetectionParams,
    pub max_frame_width: usize,
    pub max_frame_height: usize,
    pub max_frame_bytes: usize,
    /// Two different cards whose confidences are this close make a frame
    /// ambiguous.
    pub ambiguity_margin: f64,
    /// Served at `/` when set, e.g. the built classroom UI.
    pub static_dir: Option<PathBuf>,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            spec: MarkerSpec::default(),
            params: DetectionParams::default(),
            max_frame_width: 1920,
            max_frame_height: 1080,
            max_frame_bytes: 16 * 1024 * 1024,
            ambiguity_margin: 0.1,
            static_dir: None,
        }
    }
}

#[derive(Clone)]
pub struct AppState {
    classroom: Arc<Mutex<Classroom>>,
    config: Arc<ServiceConfig>,
}

impl AppState {
    pub fn new(classroom: Classroom, config: ServiceConfig) -> Self {
        Self {
            classroom: Arc::new(Mutex::new(classroom)),
            config: Arc::new(config),
        }
    }

    /// The shared classroom. Operations run to completion under the lock, so
    /// a panic cannot leave half an update behind.
    pub fn classroom(&self) -> MutexGuard<'_, Classroom> {
        self.classroom.lock().unwrap_or_else(|e| e.into_inner())
    }

    pub fn config(&self) -> &ServiceConfig {
        &self.config
    }
}

pub fn router(state: AppState) -> Router {
    let api = Router::new()
        .route("/health", get(handlers::health))
        .route("/classes", post(handlers::create_class).get(handlers::list_classes))
        .route("/classes/{id}", get(handlers::get_class))
        .route("/classes/{id}/students", post(handlers::add_student))
        .route("/sessions", post(handlers::start_session))
        .route("/sessions/{id}", get(handlers::get_session))
        .route("/sessions/{id}/question", get(handlers::get_question))
        .route("/sessions/{id}/frames", post(frames::post_frame))
        .route("/sessions/{id}/acknowledge", post(handlers::acknowledge))
        .route("/sessions/{id}/manual", post(handlers::manual))
        .route("/sessions/{id}/end", post(handlers::end_session))
        .route("/students/{id}/progress", get(handlers::progress))
        .layer(DefaultBodyLimit::max(state.config.max_frame_bytes));
    let mut app = Router::new().nest("/v1", api);
    if let Some(dir) = &state.config.static_dir {
        app = app.fallback_service(ServeDir::new(dir));
    }
    app.layer(CorsLayer::permissive()).with_state(state)
}

/// Serves until Ctrl-C.
pub async fn serve(listener: TcpListener, state: AppState) -> std::io::Result<()> {
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
