//! RSA-group time-lock hashing: `H(x) = base(x)^(2^v) mod N`.
//!
//! Without the factorization the only known way to evaluate this is `v`
//! sequential squarings. The server keeps `p` and `q` and reduces the
//! exponent modulo `p - 1` and `q - 1`, combining the halves with CRT.

use std::fmt;

use num_bigint::BigUint;
use num_traits::{One, Zero};
use rand::{CryptoRng, RngCore};
use sha2::{Digest, Sha256};

use super::RateLimitError;
use crate::oprf::PrfOutput;

/// Smallest modulus accepted.
pub const MIN_MODULUS_BITS: usize = 2048;

const RESIDUE_LABEL: &[u8] = b"MIGP-v1/timelock-base";
const COMPRESS_LABEL: &[u8] = b"MIGP-v1/timelock-out";

/// Public puzzle parameters: the modulus and the squaring count.
#[derive(Clone, PartialEq, Eq)]
pub struct TimelockParams {
    modulus: BigUint,
    v: u64,
}

impl TimelockParams {
    pub fn new(modulus: BigUint, v: u64) -> Result<Self, RateLimitError> {
        if modulus.bits() < MIN_MODULUS_BITS as u64 {
            return Err(RateLimitError::Config(format!(
                "time-lock modulus must have at least {MIN_MODULUS_BITS} bits"
            )));
        }
        if v == 0 {
            return Err(RateLimitError::Config("time-lock cost v must be at least 1".into()));
        }
        Ok(TimelockParams { modulus, v })
    }

    pub fn modulus(&self) -> &BigUint {
        &self.modulus
    }

    pub fn v(&self) -> u64 {
        self.v
    }

    pub fn with_v(&self, v: u64) -> Result<Self, RateLimitError> {
        TimelockParams::new(self.modulus.clone(), v)
    }

    fn modulus_len(&self) -> usize {
        (self.modulus.bits() as usize).div_ceil(8)
    }
}

impl fmt::Debug for TimelockParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "TimelockParams({} bits, v={})", self.modulus.bits(), self.v)
    }
}

/// Server-side secret: the prime factors of the modulus. It is valid for
/// every `v` over the same modulus.
#[derive(Clone)]
pub struct TimelockTrapdoor {
    p: BigUint,
    q: BigUint,
    q_inv_p: BigUint,
}

impl TimelockTrapdoor {
    pub fn from_primes(params: &TimelockParams, p: BigUint, q: BigUint) -> Result<Self, RateLimitError> {
        if &p * &q != params.modulus || p == q {
            return Err(RateLimitError::Config("trapdoor primes do not factor the modulus".into()));
        }
        // q^(p-2) mod p, valid because p is prime
        let q_inv_p = (&q % &p).modpow(&(&p - 2u32), &p);
        Ok(TimelockTrapdoor { p, q, q_inv_p })
    }

    pub fn primes(&self) -> (&BigUint, &BigUint) {
        (&self.p, &self.q)
    }
}

impl fmt::Debug for TimelockTrapdoor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("TimelockTrapdoor(..)")
    }
}

/// Generates a fresh modulus of `bits` bits and its trapdoor.
pub fn generate<R: RngCore + CryptoRng>(
    bits: usize,
    v: u64,
    rng: &mut R,
) -> Result<(TimelockParams, TimelockTrapdoor), RateLimitError> {
    use num_bigint_dig::RandPrime;
    if bits < MIN_MODULUS_BITS {
        return Err(RateLimitError::Config(format!(
            "time-lock modulus must have at least {MIN_MODULUS_BITS} bits"
        )));
    }
    loop {
        let p = to_biguint(&rng.gen_prime(bits / 2));
        let q = to_biguint(&rng.gen_prime(bits - bits / 2));
        let n = &p * &q;
        if p == q || n.bits() != bits as u64 {
            continue;
        }
        let params = TimelockParams::new(n, v)?;
        let trapdoor = TimelockTrapdoor::from_primes(&params, p, q)?;
        return Ok((params, trapdoor));
    }
}

fn to_biguint(x: &num_bigint_dig::BigUint) -> BigUint {
    BigUint::from_bytes_be(&x.to_bytes_be())
}

/// Maps `x` to a residue in `[2, N - 2]` by counter-mode SHA-256 expansion
/// to the modulus width plus 128 bits, then reduction.
pub fn hash_to_residue(params: &TimelockParams, x: &[u8]) -> BigUint {
    let n = &params.modulus;
    let width = params.modulus_len() + 16;
    let n_minus_1 = n - 1u32;
    for attempt in 0u32.. {
        let mut buf = Vec::with_capacity(width + 32);
        let mut block = 0u32;
        while buf.len() < width {
            let d = Sha256::new()
                .chain_update(RESIDUE_LABEL)
                .chain_update(attempt.to_be_bytes())
                .chain_update(block.to_be_bytes())
                .chain_update(x)
                .finalize();
            buf.extend_from_slice(&d);
            block += 1;
        }
        buf.truncate(width);
        let r = BigUint::from_bytes_be(&buf) % n;
        if !r.is_zero() && !r.is_one() && r != n_minus_1 {
            return r;
        }
    }
    unreachable!("counter space exhausted")
}

fn compress(params: &TimelockParams, y: &BigUint) -> PrfOutput {
    let len = params.modulus_len();
    let raw = y.to_bytes_be();
    let mut fixed = vec![0u8; len - raw.len()];
    fixed.extend_from_slice(&raw);
    let d = Sha256::new()
        .chain_update(COMPRESS_LABEL)
        .chain_update(&fixed)
        .finalize();
    PrfOutput::truncate(&d)
}

/// Trapdoor evaluation: two half-size exponentiations and a CRT merge.
pub fn timelock_fast(params: &TimelockParams, trapdoor: &TimelockTrapdoor, x: &[u8]) -> PrfOutput {
    let base = hash_to_residue(params, x);
    let (p, q) = (&trapdoor.p, &trapdoor.q);
    let two = BigUint::from(2u32);
    let v = BigUint::from(params.v);
    let e_p = two.modpow(&v, &(p - 1u32));
    let e_q = two.modpow(&v, &(q - 1u32));
    let y_p = (&base % p).modpow(&e_p, p);
    let y_q = (&base % q).modpow(&e_q, q);
    // y = y_q + q * ((y_p - y_q) * q^-1 mod p)
    let diff = (&y_p + p - (&y_q % p)) % p;
    let h = (diff * &trapdoor.q_inv_p) % p;
    let y = y_q + q * h;
    compress(params, &y)
}

/// Public evaluation by `v` sequential squarings.
pub fn timelock_slow(params: &TimelockParams, x: &[u8]) -> PrfOutput {
    let mut ops = 0;
    timelock_slow_counted(params, x, &mut ops)
}

/// [`timelock_slow`] that adds the number of squarings performed to `ops`.
pub fn timelock_slow_counted(params: &TimelockParams, x: &[u8], ops: &mut u64) -> PrfOutput {
    let n = &params.modulus;
    let mut y = hash_to_residue(params, x);
    for _ in 0..params.v {
        y = &y * &y % n;
        *ops += 1;
    }
    compress(params, &y)
}
