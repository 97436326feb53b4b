use std::net::SocketAddr;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response as HttpResponse};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde_json::json;

use crate::error::BackendError;
use crate::gateway::Backend;
use crate::protocol::{Capability, ErrorBody, Request};

#[derive(Clone)]
struct AppState {
    backend: Arc<dyn Backend>,
    capabilities: Arc<Vec<Capability>>,
}

fn error_response(status: StatusCode, error: String, retriable: bool) -> HttpResponse {
    (status, Json(ErrorBody { error, retriable })).into_response()
}

fn status_for(err: &BackendError) -> StatusCode {
    match err {
        BackendError::BadRequest { .. } | BackendError::Protocol { .. } => StatusCode::BAD_REQUEST,
        BackendError::Unconfigured(_) => StatusCode::NOT_FOUND,
        BackendError::Timeout { .. } => StatusCode::GATEWAY_TIMEOUT,
        BackendError::Remote { status, .. } => StatusCode::from_u16(*status).unwrap_or(StatusCode::BAD_GATEWAY),
        BackendError::Transport { .. } => StatusCode::SERVICE_UNAVAILABLE,
        BackendError::Shape { .. } => StatusCode::INTERNAL_SERVER_ERROR,
    }
}

async fn handle(State(state): State<AppState>, Path(name): Path<String>, body: Bytes) -> HttpResponse {
    let Ok(capability) = name.parse::<Capability>() else {
        return error_response(StatusCode::NOT_FOUND, format!("no route /v1/{name}"), false);
    };
    if !state.capabilities.contains(&capability) {
        return error_response(StatusCode::NOT_FOUND, format!("{capability} not served here"), false);
    }
    let request = match Request::from_json(capability, &body) {
        Ok(r) => r,
        Err(e) => return error_response(StatusCode::BAD_REQUEST, e.to_string(), false),
    };
    let backend = state.backend.clone();
    let result = tokio::task::spawn_blocking(move || backend.call(request)).await;
    match result {
        Ok(Ok(resp)) => match resp.to_json() {
            Ok(bytes) => ([("content-type", "application/json")], bytes).into_response(),
            Err(e) => error_response(StatusCode::INTERNAL_SERVER_ERROR, e.to_string(), false),
        },
        Ok(Err(e)) => error_response(status_for(&e), e.to_string(), e.is_retriable()),
        Err(e) => error_response(StatusCode::INTERNAL_SERVER_ERROR, e.to_string(), true),
    }
}

/// Routes `/v1/{capability}` to `backend`, plus `GET /v1/health` listing the
/// served capabilities.
pub fn router(backend: Arc<dyn Backend>, capabilities: Vec<Capability>) -> Router {
    let state = AppState {
        backend,
        capabilities: Arc::new(capabilities),
    };
    Router::new()
        .route(
            "/v1/health",
            get(|State(s): State<AppState>| async move {
                Json(json!({ "status": "ok", "capabilities": *s.capabilities }))
            }),
        )
        .route("/v1/{capability}", post(handle))
        .with_state(state)
}

/// A router served on a background thread until dropped.
pub struct BackgroundServer {
    addr: SocketAddr,
    shutdown: Option<tokio::sync::oneshot::Sender<()>>,
    thread: Option<std::thread::JoinHandle<()>>,
}

impl BackgroundServer {
    pub fn start(addr: SocketAddr, app: Router) -> std::io::Result<Self> {
        let rt = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
        let listener = rt.block_on(tokio::net::TcpListener::bind(addr))?;
        let addr = listener.local_addr()?;
        let (tx, rx) = tokio::sync::oneshot::channel::<()>();
        let thread = std::thread::spawn(move || {
            rt.block_on(async move {
                let serve = axum::serve(listener, app).with_graceful_shutdown(async {
                    let _ = rx.await;
                });
                if let Err(e) = serve.await {
                    log::error!("server stopped: {e}");
                }
            });
        });
        Ok(Self {
            addr,
            shutdown: Some(tx),
            thread: Some(thread),
        })
    }

    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn url(&self) -> String {
        format!("http://{}", self.addr)
    }
}

impl Drop for BackgroundServer {
    fn drop(&mut self) {
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}
