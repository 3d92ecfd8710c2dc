//! HTTP front end (axum). Plain HTTP only: deploy on loopback or behind a
//! TLS-terminating proxy.

use std::future::Future;
use std::net::SocketAddr;
use std::sync::Arc;
use std::thread;

use axum::extract::{ConnectInfo, Path, State};
use axum::http::{header, HeaderMap, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use tokio::sync::oneshot;

use super::handler::{BucketReply, MigpServer, ServerError};
use super::wire::{ErrorBody, EvaluateRequest, CLIENT_TOKEN_HEADER, EPOCH_HEADER};

type AppState = Arc<MigpServer>;

pub fn router(server: Arc<MigpServer>) -> Router {
    Router::new()
        .route("/v1/health", get(health))
        .route("/v1/params", get(params))
        .route("/v1/evaluate", post(evaluate))
        .route("/v1/query", post(query))
        .route("/v1/bucket/{id}", get(bucket))
        .with_state(server)
}

impl IntoResponse for ServerError {
    fn into_response(self) -> Response {
        let status = StatusCode::from_u16(self.status()).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
        let mut resp = (status, Json(ErrorBody { error: self.to_string() })).into_response();
        if let ServerError::RateLimited { retry_after } = self {
            let secs = retry_after.as_secs_f64().ceil().max(1.0) as u64;
            resp.headers_mut()
                .insert(header::RETRY_AFTER, HeaderValue::from(secs));
        }
        resp
    }
}

fn client_token(headers: &HeaderMap, peer: SocketAddr) -> String {
    headers
        .get(CLIENT_TOKEN_HEADER)
        .and_then(|v| v.to_str().ok())
        .filter(|v| !v.is_empty())
        .map(|v| format!("token:{v}"))
        .unwrap_or_else(|| format!("ip:{}", peer.ip()))
}

async fn health() -> &'static str {
    "ok"
}

async fn params(State(s): State<AppState>) -> impl IntoResponse {
    Json(s.params())
}

async fn evaluate(
    State(s): State<AppState>,
    ConnectInfo(peer): ConnectInfo<SocketAddr>,
    headers: HeaderMap,
    Json(req): Json<EvaluateRequest>,
) -> Result<impl IntoResponse, ServerError> {
    let token = client_token(&headers, peer);
    Ok(Json(s.handle_evaluate(&token, &req)?))
}

async fn query(
    State(s): State<AppState>,
    ConnectInfo(peer): ConnectInfo<SocketAddr>,
    headers: HeaderMap,
    Json(req): Json<EvaluateRequest>,
) -> Result<impl IntoResponse, ServerError> {
    let token = client_token(&headers, peer);
    Ok(Json(s.handle_query(&token, &req)?))
}

async fn bucket(
    State(s): State<AppState>,
    Path(id): Path<String>,
    headers: HeaderMap,
) -> Result<Response, ServerError> {
    let inm = headers.get(header::IF_NONE_MATCH).and_then(|v| v.to_str().ok());
    let reply = s.serve_bucket(&id, inm)?;
    let (status, etag, epoch, body) = match reply {
        BucketReply::NotModified { etag, epoch } => (StatusCode::NOT_MODIFIED, etag, epoch, Vec::new()),
        BucketReply::Blob { etag, epoch, bytes } => (StatusCode::OK, etag, epoch, bytes),
    };
    let mut resp = (status, body).into_response();
    let h = resp.headers_mut();
    h.insert(header::CONTENT_TYPE, HeaderValue::from_static("application/octet-stream"));
    h.insert(header::CACHE_CONTROL, HeaderValue::from_static("public, no-cache"));
    if let Ok(v) = HeaderValue::from_str(&etag) {
        h.insert(header::ETAG, v);
    }
    h.insert(EPOCH_HEADER, HeaderValue::from(epoch));
    Ok(resp)
}

/// Serves until `shutdown` resolves.
pub async fn serve(
    server: Arc<MigpServer>,
    listener: tokio::net::TcpListener,
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    let app = router(server).into_make_service_with_connect_info::<SocketAddr>();
    axum::serve(listener, app).with_graceful_shutdown(shutdown).await
}

/// A server running on its own runtime thread; stops when dropped.
pub struct BackgroundServer {
    addr: SocketAddr,
    stop: Option<oneshot::Sender<()>>,
    thread: Option<thread::JoinHandle<std::io::Result<()>>>,
}

impl BackgroundServer {
    pub fn start(server: Arc<MigpServer>, addr: SocketAddr) -> std::io::Result<Self> {
        let std_listener = std::net::TcpListener::bind(addr)?;
        std_listener.set_nonblocking(true)?;
        let addr = std_listener.local_addr()?;
        let (tx, rx) = oneshot::channel::<()>();
        let thread = thread::Builder::new().name("migp-http".into()).spawn(move || {
            let rt = tokio::runtime::Builder::new_multi_thread()
                .worker_threads(2)
                .enable_all()
                .build()?;
            rt.block_on(async move {
                let listener = tokio::net::TcpListener::from_std(std_listener)?;
                serve(server, listener, async {
                    let _ = rx.await;
                })
                .await
            })
        })?;
        Ok(BackgroundServer {
            addr,
            stop: Some(tx),
            thread: Some(thread),
        })
    }

    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn url(&self) -> String {
        format!("http://{}", self.addr)
    }

    pub fn stop(mut self) -> std::io::Result<()> {
        self.shutdown()
    }

    fn shutdown(&mut self) -> std::io::Result<()> {
        if let Some(tx) = self.stop.take() {
            let _ = tx.send(());
        }
        match self.thread.take() {
            Some(t) => t.join().unwrap_or_else(|_| Err(std::io::Error::other("server thread panicked"))),
            None => Ok(()),
        }
    }
}

impl Drop for BackgroundServer {
    fn drop(&mut self) {
        let _ = self.shutdown();
    }
}
