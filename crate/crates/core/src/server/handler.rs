//! Transport-independent request handling over a swappable store snapshot.

use std::sync::Arc;
use std::time::Duration;

use parking_lot::RwLock;
use sha2::{Digest, Sha256};

use super::throttle::{RateConfig, RateLimiter};
use super::wire::{b64_decode, b64_encode, EvaluateRequest, EvaluateResponse, ParamsEcho, QueryResponse};
use crate::oprf::{evaluate, GroupElement, PrfKey};
use crate::pipeline::{BucketId, BucketStore};

/// Default largest element count per request: the password plus ten
/// client-side variants.
pub const DEFAULT_M_MAX: u16 = 11;

#[derive(Clone, Copy, Debug)]
pub struct ServerConfig {
    pub m_max: u16,
    pub rate: RateConfig,
}

impl Default for ServerConfig {
    fn default() -> Self {
        ServerConfig {
            m_max: DEFAULT_M_MAX,
            rate: RateConfig::per_window(600, Duration::from_secs(60)),
        }
    }
}

#[derive(Debug, thiserror::Error, Clone, PartialEq, Eq)]
pub enum ServerError {
    #[error("bad request: {0}")]
    BadRequest(String),
    #[error("rate limit exceeded")]
    RateLimited { retry_after: Duration },
    #[error("store and key do not match: {0}")]
    Setup(String),
}

impl ServerError {
    pub fn status(&self) -> u16 {
        match self {
            ServerError::BadRequest(_) => 400,
            ServerError::RateLimited { .. } => 429,
            ServerError::Setup(_) => 500,
        }
    }
}

pub struct Snapshot {
    store: BucketStore,
    key: PrfKey,
    params: ParamsEcho,
}

impl Snapshot {
    pub fn store(&self) -> &BucketStore {
        &self.store
    }

    pub fn params(&self) -> &ParamsEcho {
        &self.params
    }
}

/// Result of a bucket fetch with a validator.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum BucketReply {
    NotModified { etag: String, epoch: u64 },
    Blob { etag: String, epoch: u64, bytes: Vec<u8> },
}

pub struct MigpServer {
    config: ServerConfig,
    snapshot: RwLock<Arc<Snapshot>>,
    limiter: RateLimiter,
}

impl MigpServer {
    pub fn new(store: BucketStore, key: PrfKey, config: ServerConfig) -> Result<Self, ServerError> {
        if config.m_max == 0 {
            return Err(ServerError::Setup("m_max must be at least 1".into()));
        }
        Ok(MigpServer {
            snapshot: RwLock::new(Arc::new(Self::snapshot(store, key, config.m_max)?)),
            limiter: RateLimiter::new(config.rate),
            config,
        })
    }

    fn snapshot(store: BucketStore, key: PrfKey, m_max: u16) -> Result<Snapshot, ServerError> {
        if store.header().epoch != key.epoch() {
            return Err(ServerError::Setup(format!(
                "store epoch {} but key epoch {}",
                store.header().epoch,
                key.epoch()
            )));
        }
        let params = ParamsEcho::from_header(store.header(), m_max);
        Ok(Snapshot { store, key, params })
    }

    /// Atomically replaces the store and key; in-flight requests finish on
    /// the snapshot they started with.
    pub fn swap(&self, store: BucketStore, key: PrfKey) -> Result<(), ServerError> {
        let next = Arc::new(Self::snapshot(store, key, self.config.m_max)?);
        *self.snapshot.write() = next;
        Ok(())
    }

    pub fn current(&self) -> Arc<Snapshot> {
        self.snapshot.read().clone()
    }

    pub fn config(&self) -> ServerConfig {
        self.config
    }

    pub fn params(&self) -> ParamsEcho {
        self.current().params.clone()
    }

    fn parse_bucket(&self, snap: &Snapshot, hex: &str) -> Result<BucketId, ServerError> {
        BucketId::from_hex(hex, snap.store.header().prefix_bits).map_err(|e| ServerError::BadRequest(e.to_string()))
    }

    fn decode_elements(&self, elements: &[String]) -> Result<Vec<GroupElement>, ServerError> {
        let max = self.config.m_max as usize;
        if elements.is_empty() || elements.len() > max {
            return Err(ServerError::BadRequest(format!("element count must be in 1..={max}")));
        }
        elements
            .iter()
            .map(|e| {
                b64_decode(e)
                    .and_then(|b| GroupElement::from_bytes(&b).ok())
                    .ok_or_else(|| ServerError::BadRequest("malformed group element".into()))
            })
            .collect()
    }

    /// Validates first, then spends one rate unit per element.
    fn evaluate_checked(
        &self,
        snap: &Snapshot,
        token: &str,
        req: &EvaluateRequest,
    ) -> Result<(BucketId, Vec<String>), ServerError> {
        let id = self.parse_bucket(snap, &req.bucket)?;
        let elements = self.decode_elements(&req.elements)?;
        self.limiter
            .check(token, elements.len() as u32)
            .map_err(|retry_after| ServerError::RateLimited { retry_after })?;
        let evaluated = elements.iter().map(|e| b64_encode(&evaluate(&snap.key, e).to_bytes())).collect();
        Ok((id, evaluated))
    }

    pub fn handle_evaluate(&self, token: &str, req: &EvaluateRequest) -> Result<EvaluateResponse, ServerError> {
        let snap = self.current();
        let result = self.evaluate_checked(&snap, token, req);
        log_outcome("evaluate", &req.bucket, req.elements.len(), &result);
        let (_, evaluated) = result?;
        Ok(EvaluateResponse {
            evaluated,
            params: snap.params.clone(),
        })
    }

    /// One round: evaluations and the bucket together.
    pub fn handle_query(&self, token: &str, req: &EvaluateRequest) -> Result<QueryResponse, ServerError> {
        let snap = self.current();
        let result = self.evaluate_checked(&snap, token, req);
        log_outcome("query", &req.bucket, req.elements.len(), &result);
        let (id, evaluated) = result?;
        let bucket = snap.store.fetch_bucket(id).map_err(|e| ServerError::BadRequest(e.to_string()))?;
        Ok(QueryResponse {
            evaluated,
            bucket: b64_encode(bucket.as_bytes()),
            params: snap.params.clone(),
        })
    }

    pub fn serve_bucket(&self, hex: &str, if_none_match: Option<&str>) -> Result<BucketReply, ServerError> {
        let snap = self.current();
        let id = self.parse_bucket(&snap, hex)?;
        let bucket = snap.store.fetch_bucket(id).map_err(|e| ServerError::BadRequest(e.to_string()))?;
        let epoch = snap.store.header().epoch;
        let etag = etag(epoch, &snap.params.labels, id, bucket.as_bytes());
        let matched = if_none_match.is_some_and(|v| v.split(',').any(|t| t.trim() == etag || t.trim() == "*"));
        tracing::info!(bucket = %hex, entries = bucket.len(), not_modified = matched, "bucket");
        Ok(if matched {
            BucketReply::NotModified { etag, epoch }
        } else {
            BucketReply::Blob {
                etag,
                epoch,
                bytes: bucket.as_bytes().to_vec(),
            }
        })
    }
}

fn etag(epoch: u64, labels: &str, id: BucketId, bytes: &[u8]) -> String {
    let d = Sha256::new()
        .chain_update(epoch.to_le_bytes())
        .chain_update(labels.as_bytes())
        .chain_update(id.to_hex().as_bytes())
        .chain_update(bytes)
        .finalize();
    format!("\"{}\"", hex::encode(&d[..16]))
}

fn log_outcome<T>(op: &str, bucket: &str, elements: usize, result: &Result<T, ServerError>) {
    let outcome = match result {
        Ok(_) => "ok",
        Err(ServerError::BadRequest(_)) => "bad_request",
        Err(ServerError::RateLimited { .. }) => "rate_limited",
        Err(ServerError::Setup(_)) => "error",
    };
    // only the bucket id, element count and outcome are ever logged
    let bucket: String = bucket.chars().take(8).filter(|c| c.is_ascii_hexdigit()).collect();
    tracing::info!(op, bucket = %bucket, elements, outcome, "request");
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oprf::{blind, frame_credential, unblind, FastHash, OutputHash, direct_prf, h2_message};
    use crate::pipeline::{bucket_id, build_store, Blocklist, BuildParams, Credential, EntryMode};
    use crate::rate_limiter::ServerHash;
    use crate::similarity::dasr_ruleset;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn server(rate: RateConfig) -> (MigpServer, PrfKey) {
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        let key = PrfKey::generate(&mut rng);
        let corpus = vec![Credential::new("alice", "summer2019").unwrap()];
        let rules = dasr_ruleset();
        let out = build_store(
            &corpus,
            &key,
            &BuildParams {
                prefix_bits: 8,
                rules: &rules,
                n: 10,
                entry_mode: EntryMode::LastBit,
                hash: &ServerHash::Fast,
                blocklist: &Blocklist::empty(),
                with_sidecar: false,
            },
        )
        .unwrap();
        let config = ServerConfig { m_max: 11, rate };
        (MigpServer::new(out.store, key.clone(), config).unwrap(), key)
    }

    fn req(bucket: &str, k: usize) -> (EvaluateRequest, Vec<crate::oprf::Scalar>, Vec<u8>) {
        let mut rng = ChaCha20Rng::seed_from_u64(k as u64);
        let x = frame_credential("alice", "summer2019").unwrap();
        let mut factors = Vec::new();
        let elements = (0..k)
            .map(|_| {
                let (b, r) = blind(&x, &mut rng).unwrap();
                factors.push(r);
                b64_encode(&b.to_bytes())
            })
            .collect();
        (
            EvaluateRequest {
                bucket: bucket.to_owned(),
                elements,
            },
            factors,
            x,
        )
    }

    fn alice_hex() -> String {
        bucket_id("alice", 8).unwrap().to_hex()
    }

    #[test]
    fn one_element_evaluates_correctly() {
        let (s, key) = server(RateConfig::unlimited());
        let (r, factors, x) = req(&alice_hex(), 1);
        let resp = s.handle_query("t", &r).unwrap();
        assert_eq!(resp.evaluated.len(), 1);
        let ev = GroupElement::from_bytes(&b64_decode(&resp.evaluated[0]).unwrap()).unwrap();
        let out = FastHash.digest(&h2_message(&x, &unblind(&ev, &factors[0])));
        assert_eq!(out, direct_prf(&key, &x).unwrap());
        assert_eq!(b64_decode(&resp.bucket).unwrap().len(), 11 * 16);
    }

    #[test]
    fn too_many_elements_rejected() {
        let (s, _) = server(RateConfig::unlimited());
        let (r, _, _) = req(&alice_hex(), 13);
        assert!(matches!(s.handle_evaluate("t", &r), Err(ServerError::BadRequest(_))));
        let (r, _, _) = req(&alice_hex(), 0);
        assert!(matches!(s.handle_evaluate("t", &r), Err(ServerError::BadRequest(_))));
    }

    #[test]
    fn bucket_is_element_independent() {
        let (s, _) = server(RateConfig::unlimited());
        let a = s.handle_query("t", &req(&alice_hex(), 1).0).unwrap();
        let b = s.handle_query("t", &req(&alice_hex(), 3).0).unwrap();
        assert_eq!(a.bucket, b.bucket);
    }

    #[test]
    fn malformed_inputs() {
        let (s, _) = server(RateConfig::unlimited());
        let mut r = req(&alice_hex(), 1).0;
        r.elements[0] = b64_encode(&[0u8; 32]);
        assert!(matches!(s.handle_evaluate("t", &r), Err(ServerError::BadRequest(_))));
        r.elements[0] = "%%%".into();
        assert!(matches!(s.handle_evaluate("t", &r), Err(ServerError::BadRequest(_))));
        let r = req("1ff", 1).0;
        assert!(matches!(s.handle_evaluate("t", &r), Err(ServerError::BadRequest(_))));
        assert!(s.serve_bucket("zz", None).is_err());
    }

    #[test]
    fn throttling_counts_elements_after_validation() {
        let (s, _) = server(RateConfig::per_window(10, Duration::from_secs(60)));
        let bad = req(&alice_hex(), 12).0;
        assert!(matches!(s.handle_evaluate("t", &bad), Err(ServerError::BadRequest(_))));
        assert!(s.handle_evaluate("t", &req(&alice_hex(), 6).0).is_ok());
        let err = s.handle_evaluate("t", &req(&alice_hex(), 6).0).unwrap_err();
        assert!(matches!(err, ServerError::RateLimited { .. }));
        assert_eq!(err.status(), 429);
        assert!(s.handle_evaluate("other", &req(&alice_hex(), 6).0).is_ok());
    }

    #[test]
    fn etag_and_rotation() {
        let (s, key) = server(RateConfig::unlimited());
        let BucketReply::Blob { etag, bytes, .. } = s.serve_bucket(&alice_hex(), None).unwrap() else {
            panic!("expected a blob");
        };
        assert_eq!(bytes.len(), 11 * 16);
        assert!(matches!(
            s.serve_bucket(&alice_hex(), Some(&etag)).unwrap(),
            BucketReply::NotModified { .. }
        ));
        // a rotated snapshot with the same contents still changes the tag
        let mut rng = ChaCha20Rng::seed_from_u64(5);
        let next = key.rotate(&mut rng);
        let store = s.current().store().clone();
        assert!(s.swap(store.clone(), next.clone()).is_err());
        let mut h = store.header().clone();
        h.epoch = next.epoch();
        let entries: Vec<(u32, Vec<u8>)> = store.entries().map(|(b, e)| (b, e.to_vec())).collect();
        s.swap(BucketStore::from_entries(h, entries).unwrap(), next).unwrap();
        let BucketReply::Blob { etag: etag2, .. } = s.serve_bucket(&alice_hex(), Some(&etag)).unwrap() else {
            panic!("validator should have changed");
        };
        assert_ne!(etag, etag2);
    }
}
