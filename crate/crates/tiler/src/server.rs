use std::net::SocketAddr;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};

use axum::extract::State;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use tower_http::cors::{Any, CorsLayer};

use crate::session::{NodeJson, StateView, Status, TilerError, TilerSession, Window};

struct Shared {
    session: Mutex<TilerSession>,
    busy: AtomicBool,
}

type AppState = Arc<Shared>;

impl IntoResponse for TilerError {
    fn into_response(self) -> Response {
        let code = match self {
            TilerError::Busy => StatusCode::CONFLICT,
            TilerError::Solver(_) => StatusCode::INTERNAL_SERVER_ERROR,
            _ => StatusCode::BAD_REQUEST,
        };
        (code, Json(serde_json::json!({ "error": self.to_string() }))).into_response()
    }
}

#[derive(Debug, Deserialize)]
pub struct PinRequest {
    pub node: NodeJson,
    pub symbol: String,
}

#[derive(Debug, Deserialize)]
pub struct UnpinRequest {
    pub node: NodeJson,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct CompleteResponse {
    pub result: Status,
    pub state: StateView,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ResizeResponse {
    pub dropped: Vec<NodeJson>,
    pub state: StateView,
}

struct BusyGuard<'a>(&'a AtomicBool);

impl Drop for BusyGuard<'_> {
    fn drop(&mut self) {
        self.0.store(false, Ordering::SeqCst);
    }
}

fn idle(s: &Shared) -> Result<(), TilerError> {
    if s.busy.load(Ordering::SeqCst) {
        Err(TilerError::Busy)
    } else {
        Ok(())
    }
}

fn lock(s: &Shared) -> std::sync::MutexGuard<'_, TilerSession> {
    s.session.lock().unwrap_or_else(|e| e.into_inner())
}

async fn state(State(s): State<AppState>) -> Json<StateView> {
    Json(lock(&s).state())
}

async fn pin(State(s): State<AppState>, Json(req): Json<PinRequest>) -> Result<Json<StateView>, TilerError> {
    idle(&s)?;
    let mut session = lock(&s);
    session.pin(&req.node, &req.symbol)?;
    Ok(Json(session.state()))
}

async fn unpin(State(s): State<AppState>, Json(req): Json<UnpinRequest>) -> Result<Json<StateView>, TilerError> {
    idle(&s)?;
    let mut session = lock(&s);
    session.unpin(&req.node)?;
    Ok(Json(session.state()))
}

async fn resize(State(s): State<AppState>, Json(w): Json<Window>) -> Result<Json<ResizeResponse>, TilerError> {
    idle(&s)?;
    let mut session = lock(&s);
    let dropped = session.resize(w)?;
    Ok(Json(ResizeResponse { dropped, state: session.state() }))
}

async fn complete(State(s): State<AppState>) -> Result<Json<CompleteResponse>, TilerError> {
    if s.busy.swap(true, Ordering::SeqCst) {
        return Err(TilerError::Busy);
    }
    let _guard = BusyGuard(&s.busy);
    let job = lock(&s).completion_job();
    let (job, result) = tokio::task::spawn_blocking(move || {
        let r = job.run();
        (job, r)
    })
    .await
    .map_err(|e| TilerError::Solver(e.to_string()))?;
    let mut session = lock(&s);
    session.apply_completion(&job, result?);
    Ok(Json(CompleteResponse { result: session.status(), state: session.state() }))
}

/// The HTTP API over one session.
pub fn router(session: TilerSession) -> Router {
    let shared = Arc::new(Shared { session: Mutex::new(session), busy: AtomicBool::new(false) });
    let cors = CorsLayer::new().allow_origin(Any).allow_methods(Any).allow_headers(Any);
    Router::new()
        .route("/state", get(state))
        .route("/pin", post(pin))
        .route("/unpin", post(unpin))
        .route("/complete", post(complete))
        .route("/resize", post(resize))
        .layer(cors)
        .with_state(shared)
}

pub async fn serve(session: TilerSession, addr: SocketAddr) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    axum::serve(listener, router(session)).await
}

/// Serves on localhost until the process is stopped.
pub fn serve_blocking(session: TilerSession, port: u16) -> std::io::Result<()> {
    let rt = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
    rt.block_on(serve(session, SocketAddr::from(([127, 0, 0, 1], port))))
}
