//! Client-cost back-ends for the `H2` slot of the PRF.
//!
//! [`HashSpec`] is the public description that goes into store headers and
//! the params echo. [`ServerHash`] adds the server-only secrets (time-lock
//! trapdoor, salt seed) used while building a store.

mod salted;
mod slow_hash;
mod timelock;

use std::time::{Duration, Instant};

use num_bigint::BigUint;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::oprf::{FastHash, OutputHash, PrfOutput};

pub use salted::{salted_digest_server, salted_hash, salted_match_client, salted_search_par, SaltParams};
pub use slow_hash::{slow_hash, SlowHashParams};
pub use timelock::{
    generate as generate_timelock, hash_to_residue, timelock_fast, timelock_slow, timelock_slow_counted,
    TimelockParams, TimelockTrapdoor, MIN_MODULUS_BITS,
};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RateLimitError {
    #[error("rate-limit configuration: {0}")]
    Config(String),
    #[error("malformed hash parameters: {0}")]
    Malformed(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u8)]
pub enum HashKind {
    Fast = 0,
    SlowHash = 1,
    Timelock = 2,
    Salted = 3,
}

impl HashKind {
    pub fn from_u8(b: u8) -> Option<Self> {
        Some(match b {
            0 => HashKind::Fast,
            1 => HashKind::SlowHash,
            2 => HashKind::Timelock,
            3 => HashKind::Salted,
            _ => return None,
        })
    }
}

/// Public parameters of the `H2` back-end.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(into = "HashSpecWire", try_from = "HashSpecWire")]
pub enum HashSpec {
    Fast,
    SlowHash(SlowHashParams),
    Timelock(TimelockParams),
    Salted(SaltParams),
}

impl HashSpec {
    pub fn kind(&self) -> HashKind {
        match self {
            HashSpec::Fast => HashKind::Fast,
            HashSpec::SlowHash(_) => HashKind::SlowHash,
            HashSpec::Timelock(_) => HashKind::Timelock,
            HashSpec::Salted(_) => HashKind::Salted,
        }
    }

    /// Parameter bytes as stored in the store header.
    pub fn params_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        match self {
            HashSpec::Fast => {}
            HashSpec::SlowHash(p) => {
                out.extend_from_slice(&p.m_cost_kib().to_le_bytes());
                out.extend_from_slice(&p.t_cost().to_le_bytes());
                out.extend_from_slice(&p.p_cost().to_le_bytes());
            }
            HashSpec::Timelock(p) => {
                out.extend_from_slice(&p.v().to_le_bytes());
                let n = p.modulus().to_bytes_be();
                out.extend_from_slice(&(n.len() as u16).to_le_bytes());
                out.extend_from_slice(&n);
            }
            HashSpec::Salted(p) => out.push(p.bits()),
        }
        out
    }

    pub fn from_parts(kind: u8, bytes: &[u8]) -> Result<Self, RateLimitError> {
        let bad = |what: &str| RateLimitError::Malformed(what.to_owned());
        let kind = HashKind::from_u8(kind).ok_or_else(|| bad("unknown hash kind"))?;
        let u32_at = |i: usize| -> Result<u32, RateLimitError> {
            let s = bytes.get(i..i + 4).ok_or_else(|| bad("truncated"))?;
            Ok(u32::from_le_bytes(s.try_into().expect("4 bytes")))
        };
        Ok(match kind {
            HashKind::Fast if bytes.is_empty() => HashSpec::Fast,
            HashKind::SlowHash if bytes.len() == 12 => {
                HashSpec::SlowHash(SlowHashParams::new(u32_at(0)?, u32_at(4)?, u32_at(8)?)?)
            }
            HashKind::Timelock if bytes.len() >= 10 => {
                let v = u64::from_le_bytes(bytes[..8].try_into().expect("8 bytes"));
                let n_len = u16::from_le_bytes([bytes[8], bytes[9]]) as usize;
                if bytes.len() != 10 + n_len {
                    return Err(bad("time-lock modulus length"));
                }
                HashSpec::Timelock(TimelockParams::new(BigUint::from_bytes_be(&bytes[10..]), v)?)
            }
            HashKind::Salted if bytes.len() == 1 => HashSpec::Salted(SaltParams::new(bytes[0])?),
            _ => return Err(bad("parameter length does not match hash kind")),
        })
    }

    /// Searches the digests a client may have to try for `msg` and returns
    /// the first `probe` hit. Single-digest back-ends call `probe` once;
    /// the salted back-end tries every salt in parallel.
    pub fn client_search<T, F>(&self, msg: &[u8], probe: F) -> Option<T>
    where
        T: Send,
        F: Fn(&PrfOutput) -> Option<T> + Sync,
    {
        match self {
            HashSpec::Fast => probe(&FastHash.digest(msg)),
            HashSpec::SlowHash(p) => probe(&slow_hash(p, msg)),
            HashSpec::Timelock(p) => probe(&timelock_slow(p, msg)),
            HashSpec::Salted(p) => (0..p.space())
                .into_par_iter()
                .find_map_first(|r| probe(&salted_hash(msg, r as u32))),
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum HashSpecWire {
    Fast,
    Argon2id { m_cost_kib: u32, t_cost: u32, p_cost: u32 },
    Timelock { modulus_hex: String, v: u64 },
    Salted { bits: u8 },
}

impl From<HashSpec> for HashSpecWire {
    fn from(s: HashSpec) -> Self {
        match s {
            HashSpec::Fast => HashSpecWire::Fast,
            HashSpec::SlowHash(p) => HashSpecWire::Argon2id {
                m_cost_kib: p.m_cost_kib(),
                t_cost: p.t_cost(),
                p_cost: p.p_cost(),
            },
            HashSpec::Timelock(p) => HashSpecWire::Timelock {
                modulus_hex: p.modulus().to_str_radix(16),
                v: p.v(),
            },
            HashSpec::Salted(p) => HashSpecWire::Salted { bits: p.bits() },
        }
    }
}

impl TryFrom<HashSpecWire> for HashSpec {
    type Error = RateLimitError;

    fn try_from(w: HashSpecWire) -> Result<Self, Self::Error> {
        Ok(match w {
            HashSpecWire::Fast => HashSpec::Fast,
            HashSpecWire::Argon2id {
                m_cost_kib,
                t_cost,
                p_cost,
            } => HashSpec::SlowHash(SlowHashParams::new(m_cost_kib, t_cost, p_cost)?),
            HashSpecWire::Timelock { modulus_hex, v } => {
                let n = BigUint::parse_bytes(modulus_hex.as_bytes(), 16)
                    .ok_or_else(|| RateLimitError::Malformed("modulus hex".into()))?;
                HashSpec::Timelock(TimelockParams::new(n, v)?)
            }
            HashSpecWire::Salted { bits } => HashSpec::Salted(SaltParams::new(bits)?),
        })
    }
}

/// The build-time `H2`, holding whatever secrets the back-end needs.
#[derive(Clone, Debug)]
pub enum ServerHash {
    Fast,
    SlowHash(SlowHashParams),
    Timelock(TimelockParams, TimelockTrapdoor),
    /// Salts are drawn from a generator seeded by `seed` and the message, so
    /// rebuilding with the same seed reproduces the store.
    Salted(SaltParams, [u8; 32]),
}

impl ServerHash {
    pub fn spec(&self) -> HashSpec {
        match self {
            ServerHash::Fast => HashSpec::Fast,
            ServerHash::SlowHash(p) => HashSpec::SlowHash(*p),
            ServerHash::Timelock(p, _) => HashSpec::Timelock(p.clone()),
            ServerHash::Salted(p, _) => HashSpec::Salted(*p),
        }
    }

    pub fn is_salted(&self) -> bool {
        matches!(self, ServerHash::Salted(..))
    }
}

impl OutputHash for ServerHash {
    fn digest(&self, msg: &[u8]) -> PrfOutput {
        match self {
            ServerHash::Fast => FastHash.digest(msg),
            ServerHash::SlowHash(p) => slow_hash(p, msg),
            ServerHash::Timelock(p, t) => timelock_fast(p, t, msg),
            ServerHash::Salted(p, seed) => {
                let s: [u8; 32] = Sha256::new().chain_update(seed).chain_update(msg).finalize().into();
                salted_digest_server(*p, msg, &mut ChaCha20Rng::from_seed(s))
            }
        }
    }
}

/// Chooses an Argon2id pass count so one hash takes about `target`, keeping
/// the default memory and lane settings. Fits `cost = fixed + t * pass`
/// from runs at one and four passes, then corrects once at the estimate.
pub fn calibrate_slow_hash(target: Duration) -> Result<SlowHashParams, RateLimitError> {
    let one = SlowHashParams::default().with_t_cost(1)?;
    let four = one.with_t_cost(4)?;
    let t1 = measure(|| {
        slow_hash(&one, b"calibration");
    }, 3)
    .as_secs_f64();
    let t4 = measure(|| {
        slow_hash(&four, b"calibration");
    }, 3)
    .as_secs_f64();
    let per_pass = ((t4 - t1) / 3.0).max(t4 / 8.0);
    let fixed = (t1 - per_pass).max(0.0);
    let t = ((target.as_secs_f64() - fixed) / per_pass).round().max(1.0);
    let guess = one.with_t_cost(t as u32)?;
    let at_guess = measure(|| {
        slow_hash(&guess, b"calibration");
    }, 2)
    .as_secs_f64();
    let t = t * (target.as_secs_f64() - fixed).max(per_pass) / (at_guess - fixed).max(per_pass);
    one.with_t_cost(t.round().max(1.0) as u32)
}

/// Solves for the squaring count giving about `target` on this machine.
pub fn calibrate_timelock(params: &TimelockParams, target: Duration) -> Result<TimelockParams, RateLimitError> {
    const PROBE: u64 = 1 << 12;
    let probe = params.with_v(PROBE)?;
    let elapsed = measure(|| {
        timelock_slow(&probe, b"calibration");
    }, 2);
    let per_square = elapsed.as_secs_f64() / PROBE as f64;
    let v = (target.as_secs_f64() / per_square).round().max(1.0) as u64;
    params.with_v(v)
}

/// Salt bits so that the expected search at `hashes_per_sec` (half the salt
/// space) takes about `target`.
pub fn calibrate_salt_bits(hashes_per_sec: f64, target: Duration) -> Result<SaltParams, RateLimitError> {
    let space = (2.0 * hashes_per_sec * target.as_secs_f64()).max(2.0);
    SaltParams::new(space.log2().round().clamp(1.0, 32.0) as u8)
}

/// Local single-thread salted hash rate.
pub fn measure_hash_rate() -> f64 {
    const N: u32 = 1 << 16;
    let t = measure(|| {
        for r in 0..N {
            std::hint::black_box(salted_hash(b"calibration", r));
        }
    }, 1);
    N as f64 / t.as_secs_f64()
}

/// Minimum wall time of `reps` runs.
fn measure(mut f: impl FnMut(), reps: usize) -> Duration {
    (0..reps)
        .map(|_| {
            let t = Instant::now();
            f();
            t.elapsed()
        })
        .min()
        .expect("reps > 0")
}
