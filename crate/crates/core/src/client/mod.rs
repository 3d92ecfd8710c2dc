//! Client side of the protocol: variants, blinding, bucket caching and the
//! match / similar / none classification.

mod transport;

use std::collections::HashMap;
use std::fmt;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::time::Duration;

use parking_lot::Mutex;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use crate::oprf::{blind, frame_credential, h2_message, unblind, GroupElement, PrfOutput};
use crate::pipeline::{bucket_id, encode_entry, Bucket, Credential, EntryKind, EntryMode};
use crate::server::wire::b64_encode;
use crate::server::{EvaluateRequest, ParamsEcho};
use crate::similarity::{generate_variants, RuleSet};

pub use transport::{FetchedBucket, HttpTransport, LocalTransport, Transport};

#[derive(Debug, thiserror::Error, Clone, PartialEq, Eq)]
pub enum ClientError {
    #[error("invalid credential: {0}")]
    Input(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("transport error: {0}")]
    Transport(String),
    #[error("server returned {status}: {message}")]
    Server { status: u16, message: String },
    #[error("rate limited, retry after {retry_after:?}")]
    RateLimited { retry_after: Duration },
    #[error("protocol error: {0}")]
    Protocol(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum QueryOutcome {
    Match,
    /// `index` 0 is the password itself, `i >= 1` the i-th client variant;
    /// `kind` says whether the hit was an exact or a variant entry.
    Similar { index: usize, kind: EntryKind },
    None,
}

impl QueryOutcome {
    /// 0 none, 2 similar, 3 match (1 is reserved for errors).
    pub fn exit_code(&self) -> i32 {
        match self {
            QueryOutcome::None => 0,
            QueryOutcome::Similar { .. } => 2,
            QueryOutcome::Match => 3,
        }
    }
}

impl fmt::Display for QueryOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            QueryOutcome::Match => f.write_str("match"),
            QueryOutcome::Similar { index, kind } => write!(f, "similar(index={index}, kind={})", kind.name()),
            QueryOutcome::None => f.write_str("none"),
        }
    }
}

/// The password followed by its first `m` client-side variants.
pub fn client_candidates(password: &str, m: usize, rules: &RuleSet) -> Vec<String> {
    let mut out = vec![password.to_owned()];
    out.extend(generate_variants(rules, password, m));
    out
}

/// Applies the priority order given a per-candidate lookup: an exact hit on
/// the password is a match; anything else that hits is similar, lowest index
/// first and exact before variant for the same index.
pub fn classify_with<F>(count: usize, mut lookup: F) -> QueryOutcome
where
    F: FnMut(usize) -> Option<EntryKind>,
{
    for i in 0..count {
        match (i, lookup(i)) {
            (0, Some(EntryKind::Exact)) => return QueryOutcome::Match,
            (index, Some(kind)) => return QueryOutcome::Similar { index, kind },
            (_, None) => {}
        }
    }
    QueryOutcome::None
}

fn probe(bucket: &Bucket<'_>, mode: EntryMode, out: &PrfOutput) -> Option<EntryKind> {
    [EntryKind::Exact, EntryKind::Variant]
        .into_iter()
        .find(|k| bucket.contains(&encode_entry(mode, out, *k)))
}

/// Classification against a bucket with PRF values from a callback. The
/// callback maps a framed credential to every digest it could have been
/// stored under (one for most back-ends).
pub fn classify_offline<F>(
    username: &str,
    password: &str,
    m: usize,
    client_rules: &RuleSet,
    bucket: &Bucket<'_>,
    mode: EntryMode,
    prf: F,
) -> QueryOutcome
where
    F: Fn(&[u8]) -> Vec<PrfOutput>,
{
    let Ok(cred) = Credential::new(username, password) else {
        return QueryOutcome::None;
    };
    let candidates = client_candidates(cred.password(), m, client_rules);
    classify_with(candidates.len(), |i| {
        let input = frame_credential(cred.username(), &candidates[i]).ok()?;
        let outs = prf(&input);
        [EntryKind::Exact, EntryKind::Variant]
            .into_iter()
            .find(|k| outs.iter().any(|o| bucket.contains(&encode_entry(mode, o, *k))))
    })
}

type CacheKey = (String, u64, String);

/// A client handle; safe to share across threads.
pub struct MigpClient {
    transport: Arc<dyn Transport>,
    rules: RuleSet,
    params: Mutex<Option<ParamsEcho>>,
    cache: Mutex<HashMap<CacheKey, Arc<Vec<u8>>>>,
    rng: Mutex<ChaCha20Rng>,
    fetches: AtomicU64,
}

impl MigpClient {
    pub fn new(transport: Arc<dyn Transport>, client_rules: RuleSet) -> Self {
        let rng = ChaCha20Rng::from_rng(rand::rngs::OsRng).expect("OS randomness");
        Self::with_rng(transport, client_rules, rng)
    }

    /// Uses `rng` for blinding factors (tests only need reproducibility).
    pub fn with_rng(transport: Arc<dyn Transport>, client_rules: RuleSet, rng: ChaCha20Rng) -> Self {
        MigpClient {
            transport,
            rules: client_rules,
            params: Mutex::new(None),
            cache: Mutex::new(HashMap::new()),
            rng: Mutex::new(rng),
            fetches: AtomicU64::new(0),
        }
    }

    /// Number of bucket downloads so far.
    pub fn bucket_fetches(&self) -> u64 {
        self.fetches.load(Ordering::Relaxed)
    }

    pub fn params(&self) -> Result<ParamsEcho, ClientError> {
        if let Some(p) = self.params.lock().clone() {
            return Ok(p);
        }
        let p = self.transport.params()?;
        *self.params.lock() = Some(p.clone());
        Ok(p)
    }

    fn validate(&self, p: &ParamsEcho, m: usize) -> Result<EntryMode, ClientError> {
        if m > 0 && p.m_max <= 1 {
            return Err(ClientError::Config(
                "server does not accept client-side variants; query with m = 0".into(),
            ));
        }
        if m + 1 > p.m_max as usize {
            return Err(ClientError::Config(format!(
                "m = {m} exceeds the server limit of {} client variants",
                p.m_max - 1
            )));
        }
        if p.group != crate::oprf::GROUP_NAME || p.labels != crate::oprf::DOMAIN_LABELS {
            return Err(ClientError::Config("server uses a different group or domain labels".into()));
        }
        p.entry_mode()
            .ok_or_else(|| ClientError::Protocol(format!("unknown entry mode {}", p.entry_mode)))
    }

    fn bucket(&self, epoch: u64, hex: &str) -> Result<Arc<Vec<u8>>, ClientError> {
        let key = (self.transport.endpoint(), epoch, hex.to_owned());
        if let Some(b) = self.cache.lock().get(&key) {
            return Ok(b.clone());
        }
        let fetched = self.transport.fetch_bucket(hex)?;
        self.fetches.fetch_add(1, Ordering::Relaxed);
        if fetched.epoch != epoch {
            *self.params.lock() = None;
            return Err(ClientError::Protocol("key epoch changed during the query; retry".into()));
        }
        let blob = Arc::new(fetched.bytes);
        let mut cache = self.cache.lock();
        cache.retain(|(ep, e, _), _| !(ep == &key.0 && *e != epoch));
        cache.insert(key, blob.clone());
        Ok(blob)
    }

    /// Runs the protocol: the password and its `m` variants are blinded and
    /// sent in one request; the bucket comes from the cache or a fetch.
    pub fn check(&self, username: &str, password: &str, m: usize) -> Result<QueryOutcome, ClientError> {
        self.run(username, password, m, false)
    }

    /// Like [`MigpClient::check`] but in a single round trip that returns
    /// the bucket with the evaluations, bypassing the cache.
    pub fn check_single_round(&self, username: &str, password: &str, m: usize) -> Result<QueryOutcome, ClientError> {
        self.run(username, password, m, true)
    }

    fn run(&self, username: &str, password: &str, m: usize, single: bool) -> Result<QueryOutcome, ClientError> {
        let cred = Credential::new(username, password).map_err(|e| ClientError::Input(e.to_string()))?;
        let params = self.params()?;
        self.validate(&params, m)?;
        let id = bucket_id(cred.username(), params.prefix_bits).map_err(|e| ClientError::Protocol(e.to_string()))?;
        let candidates = client_candidates(cred.password(), m, &self.rules);
        let inputs: Vec<Vec<u8>> = candidates
            .iter()
            .map(|w| frame_credential(cred.username(), w))
            .collect::<Result<_, _>>()
            .map_err(|e| ClientError::Input(e.to_string()))?;
        let mut factors = Vec::with_capacity(inputs.len());
        let mut elements = Vec::with_capacity(inputs.len());
        {
            let mut rng = self.rng.lock();
            for x in &inputs {
                let (b, r) = blind(x, &mut *rng).map_err(|e| ClientError::Input(e.to_string()))?;
                elements.push(b64_encode(&b.to_bytes()));
                factors.push(r);
            }
        }
        let req = EvaluateRequest {
            bucket: id.to_hex(),
            elements,
        };
        let (evaluated, echo, blob) = if single {
            let resp = self.transport.query(&req)?;
            let blob = Arc::new(transport::decode_b64(&resp.bucket)?);
            (resp.evaluated, resp.params, blob)
        } else {
            let resp = self.transport.evaluate(&req)?;
            let blob = self.bucket(resp.params.epoch, &req.bucket)?;
            (resp.evaluated, resp.params, blob)
        };
        if echo.prefix_bits != params.prefix_bits || echo.entry_mode != params.entry_mode || echo.hash != params.hash {
            *self.params.lock() = None;
            return Err(ClientError::Protocol("server parameters changed; retry".into()));
        }
        if echo.epoch != params.epoch {
            *self.params.lock() = Some(echo.clone());
        }
        if evaluated.len() != inputs.len() {
            return Err(ClientError::Protocol("evaluation count mismatch".into()));
        }
        let mode = self.validate(&echo, m)?;
        let bucket = Bucket::new(&blob, mode.entry_len()).map_err(|e| ClientError::Protocol(e.to_string()))?;
        let messages: Vec<Vec<u8>> = evaluated
            .iter()
            .zip(&factors)
            .zip(&inputs)
            .map(|((e, r), x)| {
                let el = GroupElement::from_bytes(&transport::decode_b64(e)?)
                    .map_err(|_| ClientError::Protocol("malformed evaluated element".into()))?;
                Ok(h2_message(x, &unblind(&el, r)))
            })
            .collect::<Result<_, ClientError>>()?;
        Ok(classify_with(messages.len(), |i| {
            echo.hash.client_search(&messages[i], |d| probe(&bucket, mode, d))
        }))
    }
}
