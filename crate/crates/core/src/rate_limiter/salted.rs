//! Secret-salt hashing: the server hashes `x || r` for a random `v`-bit `r`
//! it then forgets, and the client searches all `2^v` salts.

use rand::{Rng, RngCore};
use rayon::prelude::*;
use sha2::{Digest, Sha256};

use super::RateLimitError;
use crate::oprf::PrfOutput;

const LABEL: &[u8] = b"MIGP-v1/salted";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SaltParams {
    bits: u8,
}

impl SaltParams {
    pub fn new(bits: u8) -> Result<Self, RateLimitError> {
        if !(1..=32).contains(&bits) {
            return Err(RateLimitError::Config("salt bits must be in 1..=32".into()));
        }
        Ok(SaltParams { bits })
    }

    pub fn bits(&self) -> u8 {
        self.bits
    }

    /// Number of salts, `2^v`.
    pub fn space(&self) -> u64 {
        1u64 << self.bits
    }
}

pub fn salted_hash(x: &[u8], r: u32) -> PrfOutput {
    let d = Sha256::new()
        .chain_update(LABEL)
        .chain_update(x)
        .chain_update(r.to_be_bytes())
        .finalize();
    PrfOutput::truncate(&d)
}

/// Hashes `x` under a fresh salt drawn from `rng`; the salt is not returned.
pub fn salted_digest_server<R: RngCore + ?Sized>(params: SaltParams, x: &[u8], rng: &mut R) -> PrfOutput {
    let r = rng.gen_range(0..params.space()) as u32;
    salted_hash(x, r)
}

/// Sequential search for the salt that produced `candidate`, together with
/// the number of hashes tried.
pub fn salted_match_client(params: SaltParams, x: &[u8], candidate: &PrfOutput) -> (Option<u32>, u64) {
    let mut tried = 0;
    for r in 0..params.space() {
        tried += 1;
        let r = r as u32;
        if salted_hash(x, r) == *candidate {
            return (Some(r), tried);
        }
    }
    (None, tried)
}

/// Parallel salt search for any digest accepted by `accept`. Returns the
/// smallest matching salt.
pub fn salted_search_par<F>(params: SaltParams, x: &[u8], accept: F) -> Option<u32>
where
    F: Fn(&PrfOutput) -> bool + Sync,
{
    (0..params.space())
        .into_par_iter()
        .map(|r| r as u32)
        .find_first(|&r| accept(&salted_hash(x, r)))
}
