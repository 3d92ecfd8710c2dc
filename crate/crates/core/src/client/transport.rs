//! How a client reaches a server: in process or over HTTP.

use std::sync::Arc;
use std::time::Duration;

use super::ClientError;
use crate::server::wire::{b64_decode, ErrorBody, CLIENT_TOKEN_HEADER, EPOCH_HEADER};
use crate::server::{BucketReply, EvaluateRequest, EvaluateResponse, MigpServer, ParamsEcho, QueryResponse, ServerError};

/// A bucket blob and the key epoch it was served under.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FetchedBucket {
    pub epoch: u64,
    pub bytes: Vec<u8>,
}

pub trait Transport: Send + Sync {
    /// Stable name used to key the bucket cache.
    fn endpoint(&self) -> String;
    fn params(&self) -> Result<ParamsEcho, ClientError>;
    fn evaluate(&self, req: &EvaluateRequest) -> Result<EvaluateResponse, ClientError>;
    fn query(&self, req: &EvaluateRequest) -> Result<QueryResponse, ClientError>;
    fn fetch_bucket(&self, hex: &str) -> Result<FetchedBucket, ClientError>;
}

/// Calls a [`MigpServer`] directly.
pub struct LocalTransport {
    server: Arc<MigpServer>,
    token: String,
}

impl LocalTransport {
    pub fn new(server: Arc<MigpServer>, token: impl Into<String>) -> Self {
        LocalTransport {
            server,
            token: token.into(),
        }
    }
}

fn from_server(e: ServerError) -> ClientError {
    match e {
        ServerError::RateLimited { retry_after } => ClientError::RateLimited { retry_after },
        other => ClientError::Server {
            status: other.status(),
            message: other.to_string(),
        },
    }
}

impl Transport for LocalTransport {
    fn endpoint(&self) -> String {
        format!("local:{:p}", Arc::as_ptr(&self.server))
    }

    fn params(&self) -> Result<ParamsEcho, ClientError> {
        Ok(self.server.params())
    }

    fn evaluate(&self, req: &EvaluateRequest) -> Result<EvaluateResponse, ClientError> {
        self.server.handle_evaluate(&self.token, req).map_err(from_server)
    }

    fn query(&self, req: &EvaluateRequest) -> Result<QueryResponse, ClientError> {
        self.server.handle_query(&self.token, req).map_err(from_server)
    }

    fn fetch_bucket(&self, hex: &str) -> Result<FetchedBucket, ClientError> {
        match self.server.serve_bucket(hex, None).map_err(from_server)? {
            BucketReply::Blob { epoch, bytes, .. } => Ok(FetchedBucket { epoch, bytes }),
            BucketReply::NotModified { .. } => Err(ClientError::Protocol("unexpected not-modified".into())),
        }
    }
}

const MAX_BODY: u64 = 1 << 30;

/// Blocking HTTP client for the `/v1` endpoints.
pub struct HttpTransport {
    base: String,
    agent: ureq::Agent,
    token: Option<String>,
}

impl HttpTransport {
    pub fn new(base_url: &str, token: Option<String>, timeout: Duration) -> Self {
        let config = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(timeout))
            .build();
        HttpTransport {
            base: base_url.trim_end_matches('/').to_owned(),
            agent: ureq::Agent::new_with_config(config),
            token,
        }
    }

    fn check(resp: &mut ureq::http::Response<ureq::Body>) -> Result<(), ClientError> {
        let status = resp.status().as_u16();
        if status == 200 {
            return Ok(());
        }
        if status == 429 {
            let secs = resp
                .headers()
                .get("retry-after")
                .and_then(|v| v.to_str().ok())
                .and_then(|v| v.parse::<u64>().ok())
                .unwrap_or(1);
            return Err(ClientError::RateLimited {
                retry_after: Duration::from_secs(secs),
            });
        }
        let message = resp
            .body_mut()
            .read_json::<ErrorBody>()
            .map(|b| b.error)
            .unwrap_or_else(|_| format!("HTTP {status}"));
        Err(ClientError::Server { status, message })
    }

    fn post<T: serde::de::DeserializeOwned>(&self, path: &str, req: &EvaluateRequest) -> Result<T, ClientError> {
        let mut r = self.agent.post(format!("{}{path}", self.base));
        if let Some(t) = &self.token {
            r = r.header(CLIENT_TOKEN_HEADER, t);
        }
        let mut resp = r.send_json(req).map_err(transport_err)?;
        Self::check(&mut resp)?;
        resp.body_mut()
            .with_config()
            .limit(MAX_BODY)
            .read_json()
            .map_err(|e| ClientError::Protocol(e.to_string()))
    }
}

fn transport_err(e: ureq::Error) -> ClientError {
    ClientError::Transport(e.to_string())
}

impl Transport for HttpTransport {
    fn endpoint(&self) -> String {
        self.base.clone()
    }

    fn params(&self) -> Result<ParamsEcho, ClientError> {
        let mut resp = self.agent.get(format!("{}/v1/params", self.base)).call().map_err(transport_err)?;
        Self::check(&mut resp)?;
        resp.body_mut().read_json().map_err(|e| ClientError::Protocol(e.to_string()))
    }

    fn evaluate(&self, req: &EvaluateRequest) -> Result<EvaluateResponse, ClientError> {
        self.post("/v1/evaluate", req)
    }

    fn query(&self, req: &EvaluateRequest) -> Result<QueryResponse, ClientError> {
        self.post("/v1/query", req)
    }

    fn fetch_bucket(&self, hex: &str) -> Result<FetchedBucket, ClientError> {
        let mut resp = self
            .agent
            .get(format!("{}/v1/bucket/{hex}", self.base))
            .call()
            .map_err(transport_err)?;
        Self::check(&mut resp)?;
        let epoch = resp
            .headers()
            .get(EPOCH_HEADER)
            .and_then(|v| v.to_str().ok())
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| ClientError::Protocol("bucket response without epoch".into()))?;
        let bytes = resp
            .body_mut()
            .with_config()
            .limit(MAX_BODY)
            .read_to_vec()
            .map_err(transport_err)?;
        Ok(FetchedBucket { epoch, bytes })
    }
}

pub(crate) fn decode_b64(s: &str) -> Result<Vec<u8>, ClientError> {
    b64_decode(s).ok_or_else(|| ClientError::Protocol("bad base64".into()))
}
