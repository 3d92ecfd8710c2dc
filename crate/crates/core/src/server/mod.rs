//! The online query service.

mod handler;
mod http;
mod throttle;
pub mod wire;

pub use handler::{BucketReply, MigpServer, ServerConfig, ServerError, Snapshot, DEFAULT_M_MAX};
pub use http::{router, serve, BackgroundServer};
pub use throttle::{RateConfig, RateLimiter};
pub use wire::{EvaluateRequest, EvaluateResponse, ParamsEcho, QueryResponse};
