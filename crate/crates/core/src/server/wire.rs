//! JSON request and response bodies. Group elements and bucket blobs are
//! standard base64.

use base64::engine::general_purpose::STANDARD;
use base64::Engine as _;
use serde::{Deserialize, Serialize};

use crate::pipeline::{EntryMode, StoreHeader};
use crate::rate_limiter::HashSpec;

/// Header carrying the client identifier used for rate limiting.
pub const CLIENT_TOKEN_HEADER: &str = "x-migp-client-token";
/// Header on bucket responses naming the key epoch of the blob.
pub const EPOCH_HEADER: &str = "x-migp-epoch";

/// Public server parameters, returned by `GET /v1/params` and with every
/// evaluation.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamsEcho {
    pub group: String,
    pub labels: String,
    pub prefix_bits: u8,
    pub n: u16,
    pub m_max: u16,
    pub entry_mode: String,
    pub entry_len: usize,
    pub ruleset_id: String,
    pub epoch: u64,
    pub beta: u64,
    pub hash: HashSpec,
}

impl ParamsEcho {
    pub fn from_header(h: &StoreHeader, m_max: u16) -> Self {
        ParamsEcho {
            group: crate::oprf::GROUP_NAME.to_owned(),
            labels: h.labels.clone(),
            prefix_bits: h.prefix_bits,
            n: h.n,
            m_max,
            entry_mode: h.entry_mode.name().to_owned(),
            entry_len: h.entry_mode.entry_len(),
            ruleset_id: h.ruleset_id.clone(),
            epoch: h.epoch,
            beta: h.beta,
            hash: h.hash.clone(),
        }
    }

    pub fn entry_mode(&self) -> Option<EntryMode> {
        EntryMode::parse(&self.entry_mode).filter(|m| m.entry_len() == self.entry_len)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvaluateRequest {
    /// Lowercase hex of the bucket prefix, left-aligned in whole bytes.
    pub bucket: String,
    pub elements: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvaluateResponse {
    pub evaluated: Vec<String>,
    pub params: ParamsEcho,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueryResponse {
    pub evaluated: Vec<String>,
    pub bucket: String,
    pub params: ParamsEcho,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: String,
}

pub fn b64_encode(bytes: &[u8]) -> String {
    STANDARD.encode(bytes)
}

pub fn b64_decode(s: &str) -> Option<Vec<u8>> {
    STANDARD.decode(s).ok()
}
